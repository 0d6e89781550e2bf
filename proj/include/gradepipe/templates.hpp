#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>

#include "gradepipe/digest.hpp"
#include "gradepipe/error.hpp"
#include "gradepipe/util.hpp"

namespace gradepipe {

/// Versioned prompt/message templates with closed {{placeholder}} sets.
///
/// Every template file has a fixed list of allowed placeholders; a file that
/// uses anything else is rejected when the set is loaded, and rendering
/// requires a value for every placeholder the file uses. One trailing newline
/// is stripped from each file on load.
class TemplateSet {
 public:
  static const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> kSchema = {
        {"ocr_solution", {"statement"}},
        {"ocr_final", {"statement"}},
        {"system", {"principles"}},
        {"system_principles", {}},
        {"grade",
         {"statement", "reference_solution", "reference_final_answer", "rubric_kind", "rubric_body", "guidance",
          "solution_text", "final_answer_text", "max_points", "grid"}},
        {"guidance_ocr_leniency", {}},
        {"draft_rubric", {"rubric_kind", "max_points", "statement", "reference_solution", "exemplar_body"}},
        {"message", {"salutation_name", "sections", "total", "disclaimer"}},
        {"message_section", {"number", "points", "evaluation"}},
        {"message_pending", {"number"}},
        {"message_disclaimer", {}},
    };
    return kSchema;
  }

  static TemplateSet load(const std::filesystem::path& dir) {
    TemplateSet set;
    for (const auto& [name, allowed] : schema()) {
      const auto path = dir / (name + ".txt");
      if (!std::filesystem::exists(path)) throw TemplateError("missing template " + path.string());
      std::string text = read_file(path);
      if (!text.empty() && text.back() == '\n') text.pop_back();
      for (const auto& ph : placeholders(text)) {
        if (!allowed.count(ph)) throw TemplateError("template " + name + " uses unknown placeholder {{" + ph + "}}");
      }
      set.texts_.emplace(name, std::move(text));
    }
    std::string material;
    for (const auto& [name, text] : set.texts_) {
      material += name;
      material.push_back('\0');
      material += text;
      material.push_back('\0');
    }
    set.version_ = "sha256:" + sha256_hex(material).substr(0, 16);
    return set;
  }

  const std::string& raw(const std::string& name) const {
    auto it = texts_.find(name);
    if (it == texts_.end()) throw TemplateError("no template named " + name);
    return it->second;
  }

  std::string render(const std::string& name, const std::map<std::string, std::string>& values) const {
    const std::string& text = raw(name);
    std::string out;
    out.reserve(text.size() + 256);
    std::size_t pos = 0;
    while (true) {
      const auto open = text.find("{{", pos);
      if (open == std::string::npos) {
        out.append(text, pos, std::string::npos);
        break;
      }
      const auto close = text.find("}}", open + 2);
      if (close == std::string::npos) throw TemplateError("unterminated placeholder in " + name);
      out.append(text, pos, open - pos);
      const std::string key = text.substr(open + 2, close - open - 2);
      auto it = values.find(key);
      if (it == values.end()) throw TemplateError("no value for {{" + key + "}} in " + name);
      out += it->second;
      pos = close + 2;
    }
    return out;
  }

  const std::string& version() const { return version_; }

  static std::set<std::string> placeholders(std::string_view text) {
    std::set<std::string> out;
    std::size_t pos = 0;
    while ((pos = text.find("{{", pos)) != std::string_view::npos) {
      const auto close = text.find("}}", pos + 2);
      if (close == std::string_view::npos) throw TemplateError("unterminated placeholder");
      out.emplace(text.substr(pos + 2, close - pos - 2));
      pos = close + 2;
    }
    return out;
  }

 private:
  std::map<std::string, std::string> texts_;
  std::string version_;
};

}  // namespace gradepipe
