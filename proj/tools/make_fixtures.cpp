// Regenerates the bundled test fixtures under --out (default tests/fixtures):
//
//   batch57/     57 submissions x 3 questions, replay responses for every call
//   dual_rubric/ the dual-rubric case (one solution, both rubrics)
//   figures/     constructed datasets behind the summary-statistic checks
//
// Output is a pure function of the templates and the fixed seed, so a run
// against an unchanged tree reproduces the committed files byte for byte.

#include <CLI11.hpp>
#include <zlib.h>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "gradepipe/pipeline.hpp"
#include "support/figures.hpp"

namespace gp = gradepipe;
namespace fs = std::filesystem;

namespace {

constexpr std::uint32_t kSeed = 20240171;

// PNG

void put_u32(std::string& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<char>((v >> s) & 0xff));
}

void put_chunk(std::string& out, const char* type, const std::string& data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  std::string body = std::string(type, 4) + data;
  out += body;
  put_u32(out, static_cast<std::uint32_t>(crc32(0, reinterpret_cast<const Bytef*>(body.data()), body.size())));
}

/// Small grayscale PNG: faint ruled lines plus per-region speckle, with the
/// region key in a tEXt chunk so every file has distinct bytes.
std::string make_png(const std::string& label, std::mt19937& rng) {
  constexpr std::uint32_t w = 96, h = 32;
  std::string raw;
  for (std::uint32_t y = 0; y < h; ++y) {
    raw.push_back(0);  // filter: none
    for (std::uint32_t x = 0; x < w; ++x) {
      unsigned char v = (y % 8 == 7) ? 200 : 250;
      if (rng() % 23 == 0) v = static_cast<unsigned char>(40 + rng() % 60);
      raw.push_back(static_cast<char>(v));
    }
  }
  uLongf zlen = compressBound(raw.size());
  std::string z(zlen, '\0');
  compress2(reinterpret_cast<Bytef*>(z.data()), &zlen, reinterpret_cast<const Bytef*>(raw.data()), raw.size(), 9);
  z.resize(zlen);

  std::string png = "\x89PNG\r\n\x1a\n";
  std::string ihdr;
  put_u32(ihdr, w);
  put_u32(ihdr, h);
  ihdr += std::string("\x08\x00\x00\x00\x00", 5);  // 8-bit grayscale
  put_chunk(png, "IHDR", ihdr);
  put_chunk(png, "tEXt", std::string("Comment") + '\0' + label);
  put_chunk(png, "IDAT", z);
  put_chunk(png, "IEND", "");
  return png;
}

// Question bank

struct QuestionDef {
  std::string id;
  std::string statement;
  std::string reference_solution;
  std::string reference_answer;
  std::int64_t max_tenths;
  std::string flexible_body;
  std::string fixed_body;
  std::vector<std::string> steps;          // correct solution, in order
  std::vector<std::string> wrong_steps;    // typical slips
  std::vector<std::string> answer_forms;   // accepted renderings of the answer
  std::vector<std::string> wrong_answers;
  std::vector<std::string> praise;         // one per step reached
  std::vector<std::string> faults;         // one per step missed
};

std::vector<QuestionDef> question_bank() {
  std::vector<QuestionDef> q;
  q.push_back(
      {"series",
       "Find the sum of the series \\sum_{n=3}^{\\infty} \\frac{2^{n-1}}{3^{n+3}}.",
       "The series is geometric with ratio r = 2/3. Its first included term (n = 3) is a_3 = 2^2/3^6 = 4/729. "
       "Since |r| < 1, S = a_3/(1 - r) = (4/729)/(1/3) = 4/243.",
       "4/243",
       30,
       "3.0 pts: the reasoning is coherent and the final answer simplifies to 4/243, whether by the infinite-sum "
       "formula or by partial sums followed by a limit.\n"
       "Partial credit for correct components, such as the geometric structure and ratio, the first included term "
       "under the student's own indexing, or a partial-sum setup with |r| < 1 so that r^N -> 0.\n"
       "Reindexing: any consistent reindexing earns full credit, and algebraically equivalent forms count as equal. "
       "Deduct only when the base term or the bounds are inconsistent.",
       "1. Geometric structure and ratio r = 2/3 (1.0 pt).\n"
       "2. First included term a_3 = 4/729, or a consistent reindexing (1.0 pt).\n"
       "3. Summation: S = a/(1 - r) applied correctly, or partial sums with the limit justified by |r| < 1; the "
       "value must simplify to 4/243 (1.0 pt). A correct setup with a minor arithmetic slip earns 0.5 here.",
       {"\\frac{2^{n-1}}{3^{n+3}} = \\frac{1}{81}\\left(\\frac{2}{3}\\right)^{n-1}", "r = \\frac{2}{3}",
        "a_3 = \\frac{2^2}{3^6} = \\frac{4}{729}", "S = \\frac{a_3}{1 - r} = \\frac{4/729}{1/3}", "S = \\frac{4}{243}"},
       {"a_3 = \\frac{2^3}{3^6}", "S = \\frac{a_3}{1 + r}", "r = \\frac{3}{2}"},
       {"4/243", "\\frac{4}{243}", "4/243."},
       {"8/243", "4/81", "12/729", "\\frac{4}{729}"},
       {"The series is rewritten in geometric form.", "The ratio 2/3 is identified.",
        "The first included term 4/729 is correct.", "The infinite-sum formula is applied to the right term.",
        "The value simplifies to 4/243."},
       {"The geometric form is not established.", "The ratio is missing or wrong.",
        "The first included term does not match the lower bound n = 3.",
        "The summation step does not use a consistent first term.", "The final value is not simplified to 4/243."}});
  q.push_back(
      {"ibp",
       "Evaluate \\int_1^{e} s \\ln s \\, ds.",
       "Take u = ln s and dv = s ds, so du = ds/s and v = s^2/2. Then the integral equals [s^2/2 ln s]_1^e - "
       "\\int_1^e s/2 ds = e^2/2 - (e^2 - 1)/4 = (e^2 + 1)/4.",
       "(e^2+1)/4",
       50,
       "5 pts: a correct integration-by-parts argument reaching (e^2 + 1)/4.\n"
       "Partial credit for a correct choice of u and dv, a correct boundary term, and a correct remaining integral. "
       "Do not penalize a false start that is abandoned for a correct approach.",
       "1. Parts setup u = ln s, dv = s ds (1.0 pt).\n"
       "2. Boundary term [s^2/2 ln s]_1^e = e^2/2 (1.5 pts).\n"
       "3. Remaining integral \\int_1^e s/2 ds = (e^2 - 1)/4 (1.5 pts).\n"
       "4. Final value (e^2 + 1)/4 (1.0 pt).",
       {"u = \\ln s, \\; dv = s\\,ds", "du = \\frac{ds}{s}, \\; v = \\frac{s^2}{2}",
        "\\left[\\frac{s^2}{2}\\ln s\\right]_1^e = \\frac{e^2}{2}", "\\int_1^e \\frac{s}{2}\\,ds = \\frac{e^2 - 1}{4}",
        "\\frac{e^2}{2} - \\frac{e^2-1}{4} = \\frac{e^2+1}{4}"},
       {"u = s, \\; dv = \\ln s\\,ds", "v = s^2", "\\int_1^e \\frac{s}{2}\\,ds = \\frac{e^2}{4}"},
       {"(e^2+1)/4", "\\frac{e^2+1}{4}", "(e^2 + 1)/4"},
       {"(e^2-1)/4", "e^2/4", "(e^2+1)/2"},
       {"The choice u = ln s, dv = s ds is correct.", "du and v are computed correctly.",
        "The boundary term e^2/2 is evaluated correctly.", "The remaining integral (e^2 - 1)/4 is correct.",
        "The final value (e^2 + 1)/4 is correct."},
       {"The parts setup is not correct.", "v is computed incorrectly.", "The boundary term is evaluated incorrectly.",
        "The remaining integral contains an error.", "The final combination is wrong."}});
  q.push_back(
      {"riemann",
       "Write \\lim_{n\\to\\infty}\\sum_{i=1}^{n}\\frac{3}{n}\\left(1+\\frac{3i}{n}\\right)^2 as a definite integral "
       "and evaluate it.",
       "With dx = 3/n and x_i = 1 + 3i/n on [1, 4], the limit is \\int_1^4 x^2 dx = (64 - 1)/3 = 21.",
       "21",
       40,
       "4 pts: the sum is identified as a right Riemann sum for x^2 on [1, 4] and evaluated to 21.\n"
       "Partial credit for the width and sample points, for the integral, and for the evaluation. An equivalent "
       "integral on a shifted interval is acceptable.",
       "1. Width dx = 3/n and sample points x_i = 1 + 3i/n (1.0 pt).\n"
       "2. Integral \\int_1^4 x^2 dx (1.5 pts).\n"
       "3. Evaluation (64 - 1)/3 = 21 (1.5 pts).",
       {"\\Delta x = \\frac{3}{n}", "x_i = 1 + \\frac{3i}{n}", "\\int_1^4 x^2\\,dx",
        "\\left[\\frac{x^3}{3}\\right]_1^4 = \\frac{64-1}{3}", "= 21"},
       {"\\Delta x = \\frac{1}{n}", "\\int_0^3 x^2\\,dx", "\\left[\\frac{x^3}{3}\\right]_1^4 = \\frac{64}{3}"},
       {"21", "21.", "= 21"},
       {"9", "64/3", "63"},
       {"The width 3/n is identified.", "The sample points match the interval [1, 4].",
        "The integral of x^2 over [1, 4] is set up correctly.", "The antiderivative is evaluated correctly.",
        "The value 21 is correct."},
       {"The width is wrong.", "The sample points do not match the interval.", "The integral has the wrong bounds.",
        "The evaluation contains an arithmetic error.", "The final value is wrong."}});
  return q;
}

gp::Score tenths(std::int64_t t) { return gp::Score::from_tenths(t); }

std::int64_t clamp_grid(std::int64_t v, std::int64_t max) { return std::clamp<std::int64_t>(v, 0, max) / 5 * 5; }

// Student work

struct Work {
  int quality = 0;  // 0..5 steps reached
  bool blank = false;
  bool slip = false;
  std::string solution;
  std::string final_answer;
  std::int64_t ta = 0;
  std::vector<std::int64_t> flexible_runs, fixed_runs;
};

std::string feedback_for(const QuestionDef& q, const Work& w, gp::RubricKind kind, std::int64_t score, int run) {
  std::string out;
  const int reached = std::min<int>(w.quality, static_cast<int>(q.praise.size()));
  for (int i = 0; i < reached; ++i) {
    if ((i + run) % 2 == 0 || i + 1 == reached) out += q.praise[static_cast<std::size_t>(i)] + " ";
  }
  if (reached < static_cast<int>(q.faults.size())) out += q.faults[static_cast<std::size_t>(reached)] + " ";
  if (w.slip) out += "There is an algebra slip in the working. ";
  if (kind == gp::RubricKind::Fixed) {
    out += "Under the point map this earns " + gp::render_decimal(tenths(score)) + " of " +
           gp::render_decimal(tenths(q.max_tenths)) + " points.";
  } else {
    out += score == q.max_tenths ? "Full credit is awarded."
                                 : "Awarded " + gp::render_decimal(tenths(score)) + " of " +
                                       gp::render_decimal(tenths(q.max_tenths)) + " points.";
  }
  return out;
}

std::string scored_response(std::int64_t score, const std::string& feedback, bool with_prose) {
  gp::json doc{{"score", gp::score_to_json(tenths(score))}, {"feedback", feedback}};
  std::string body = doc.dump();
  return with_prose ? "Here is my evaluation of the student's work.\n\n" + body + "\n" : body;
}

std::vector<std::int64_t> run_scores(std::int64_t base, std::int64_t max, std::mt19937& rng, bool split) {
  if (split && max >= 10) return {max, max - 5, max - 5};
  std::vector<std::int64_t> v;
  for (int i = 0; i < 3; ++i) {
    const auto r = rng() % 10;
    std::int64_t s = base + (r == 0 ? -5 : r == 1 ? 5 : 0);
    v.push_back(clamp_grid(s, max));
  }
  return v;
}

// batch57

const std::vector<std::string> kWords = {"otter", "maple", "comet", "falcon", "cedar", "lynx",  "quartz", "ember",
                                          "heron", "birch", "nova",  "pike",   "sable", "wren",  "delta",  "fern",
                                          "onyx",  "raven", "tide",  "aspen",  "flint", "ivy",   "lark",   "moss"};
const std::vector<std::string> kNames = {"Avery", "Jordan", "Riley", "Casey", "Morgan", "Quinn", "Rowan",
                                          "Skyler", "Emerson", "Finley", "Harper", "Kendall", "Logan", "Parker"};

void write_json(const fs::path& p, const gp::json& j) { gp::write_file(p, j.dump(2) + "\n"); }

void make_batch57(const fs::path& dir, const gp::TemplateSet& templates) {
  std::mt19937 rng(kSeed);
  const auto bank = question_bank();
  constexpr int kStudents = 57;

  std::vector<std::string> codes;
  std::set<std::string> seen;
  while (static_cast<int>(codes.size()) < kStudents) {
    std::string c = kWords[rng() % kWords.size()] + std::to_string(10 + rng() % 90);
    if (seen.insert(c).second) codes.push_back(c);
  }

  // Rubrics and questions.
  gp::json questions = gp::json::array();
  for (const auto& q : bank) {
    const std::string flex_id = q.id + "-flexible", fixed_id = q.id + "-fixed";
    gp::RubricSpec flex{flex_id, q.id, gp::RubricKind::Flexible, q.flexible_body, {}, tenths(q.max_tenths), false};
    gp::RubricSpec fixed{fixed_id, q.id, gp::RubricKind::Fixed, q.fixed_body, {}, tenths(q.max_tenths), false};
    write_json(dir / "rubrics" / (flex_id + ".json"), gp::rubric_to_json(flex));
    write_json(dir / "rubrics" / (fixed_id + ".json"), gp::rubric_to_json(fixed));
    questions.push_back({{"question_id", q.id},
                         {"statement", q.statement},
                         {"reference_solution", q.reference_solution},
                         {"reference_final_answer", q.reference_answer},
                         {"max_points", gp::score_to_json(tenths(q.max_tenths))},
                         {"rubric_ids", {flex_id, fixed_id}}});
  }

  // Student work, TA scores and run scores.
  std::map<std::pair<std::string, std::string>, Work> work;
  std::set<std::string> used_solutions;
  for (int s = 0; s < kStudents; ++s) {
    const int ability = static_cast<int>(rng() % 6);
    for (std::size_t qi = 0; qi < bank.size(); ++qi) {
      const auto& q = bank[qi];
      Work w;
      w.quality = std::clamp(ability + static_cast<int>(rng() % 3) - 1, 0, 5);
      w.blank = (s * 3 + static_cast<int>(qi)) % 41 == 7;
      w.slip = !w.blank && w.quality >= 2 && rng() % 5 == 0;
      if (!w.blank) {
        std::string sol;
        for (int i = 0; i < w.quality; ++i) sol += q.steps[static_cast<std::size_t>(i)] + "\n";
        if (w.slip || w.quality < 5) sol += q.wrong_steps[rng() % q.wrong_steps.size()] + "\n";
        // Scratch arithmetic in the margin; also keeps transcriptions distinct.
        const auto a = 3 + rng() % 17, b = 3 + rng() % 17;
        sol += std::to_string(a) + " \\times " + std::to_string(b) + " = " + std::to_string(a * b);
        if (!used_solutions.insert(q.id + sol).second) sol += "\n" + std::to_string(s);
        w.solution = sol;
      }
      if (w.quality == 5 && !w.slip) w.final_answer = q.answer_forms[rng() % q.answer_forms.size()];
      else if (w.quality >= 1) w.final_answer = q.wrong_answers[rng() % q.wrong_answers.size()];
      else w.final_answer = (s % 2) ? "" : q.wrong_answers[0];
      if (w.blank && s % 2 == 0) w.final_answer = q.answer_forms[0];

      const std::int64_t step = q.max_tenths / 5;
      w.ta = w.blank ? 0 : clamp_grid(step * w.quality - (w.slip ? 5 : 0) + 2, q.max_tenths);
      const std::int64_t flex_base = w.ta + ((rng() % 4 == 0) ? 5 : 0);
      const std::int64_t fixed_base = flex_base - ((rng() % 3 == 0) ? 5 : 0);
      const bool split = !w.blank && w.ta >= q.max_tenths - 5 && rng() % 4 == 0;
      w.flexible_runs = run_scores(flex_base, q.max_tenths, rng, split);
      w.fixed_runs = run_scores(fixed_base, q.max_tenths, rng, false);
      work[{codes[static_cast<std::size_t>(s)], q.id}] = std::move(w);
    }
  }

  // Manifest, images.
  gp::json regions = gp::json::array();
  std::mt19937 img_rng(kSeed + 1);
  for (const auto& code : codes) {
    for (const auto& q : bank) {
      for (auto kind : {gp::RegionKind::Solution, gp::RegionKind::FinalAnswer}) {
        const std::string suffix = kind == gp::RegionKind::Solution ? "sol" : "final";
        const std::string ref = "images/" + code + "_" + q.id + "_" + suffix + ".png";
        gp::write_file(dir / ref, make_png(code + "|" + q.id + "|" + suffix, img_rng));
        gp::json r{{"test_code", code}, {"question_id", q.id}, {"kind", gp::to_string(kind)}, {"image_ref", ref}};
        if (code == codes[11] && q.id == "ibp" && kind == gp::RegionKind::FinalAnswer) r["exclude"] = "SegmentationFailure";
        regions.push_back(r);
      }
    }
  }
  write_json(dir / "manifest.json", {{"quiz_id", "quiz3"},
                                     {"section_id", "A02"},
                                     {"grid", 0.5},
                                     {"rubric_dir", "rubrics"},
                                     {"questions", questions},
                                     {"regions", regions}});

  // TA export: two students never linked, one code typed with different case
  // and padding.
  std::string ta = "test_code,quiz_id,question_id,score\n";
  for (std::size_t s = 0; s < codes.size(); ++s) {
    if (s == 5 || s == 40) continue;
    for (const auto& q : bank) {
      std::string code = codes[s];
      if (s == 17) {
        for (auto& c : code) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        code = " " + code + " ";
      }
      ta += gp::csv::format_row({code, "quiz3", q.id, gp::render_decimal(tenths(work.at({codes[s], q.id}).ta))});
    }
  }
  gp::write_file(dir / "ta_scores.csv", ta);
  write_json(dir / "exclusions.json",
             {{"rules", {{{"field", "test_code"}, {"in", {codes[23]}}, {"reason", "ScanQuality"}}}}});

  std::string roster = "test_code,name\n";
  for (std::size_t s = 0; s < codes.size(); ++s) {
    if (s % 9 == 4) continue;  // not every student is on the roster
    roster += gp::csv::format_row({codes[s], kNames[s % kNames.size()] + " " + static_cast<char>('A' + s % 26) + "."});
  }
  gp::write_file(dir / "roster.csv", roster);

  std::string verdicts = "test_code,question_id,ocr_verdict,grading_verdict,reviewer_score\n";
  for (std::size_t s = 0; s < codes.size(); s += 2) {
    const auto& q = bank[s % bank.size()];
    const auto& w = work.at({codes[s], q.id});
    const char* ocr = s % 8 == 6 ? "Problematic" : "Acceptable";
    const char* grading = s % 10 == 4 ? "Incorrect" : s % 10 == 8 ? "Acceptable" : "Correct";
    verdicts += gp::csv::format_row({codes[s], q.id, ocr, grading, gp::render_decimal(tenths(w.ta))});
  }
  gp::write_file(dir / "verdicts.csv", verdicts);
  write_json(dir / "config.json", {{"temperature", 0.0}, {"parallelism", 8}, {"max_retries", 2}, {"model_id", "replay-4.1-mini"}});

  // Replay responses. Keys are computed from the batch exactly as the
  // pipeline will see it after ingest.
  const fs::path replay = dir / "replay";
  const fs::path scratch = fs::temp_directory_path() / "gradepipe_make_fixtures";
  gp::pipeline::run_ingest(dir / "manifest.json", dir / "ta_scores.csv", dir / "exclusions.json", scratch);
  const gp::Batch batch = gp::pipeline::load_batch_state(scratch);
  fs::remove_all(scratch);

  gp::pipeline::Transcriptions t;
  t.template_version = templates.version();
  for (const auto& r : batch.records) {
    if (r.status == gp::RegionStatus::Excluded) continue;
    const auto& w = work.at({r.submission.test_code, r.question_id});
    const std::string text = r.kind == gp::RegionKind::Solution ? w.solution : w.final_answer;
    t.texts[gp::region_key(r)] = text;
    const auto bundle = gp::build_ocr_prompt(batch.question(r.question_id), r.kind, templates);
    const auto key = gp::ReplayBackend::transcription_key(gp::read_file(batch.resolve_image(r)), bundle);
    gp::write_file(replay / gp::ReplayBackend::fixture_name(key, 0), text);
  }

  gp::PipelineConfig cfg = gp::load_config(dir / "config.json");
  const auto ctx = gp::pipeline::make_grade_context(cfg, templates, batch.grid_tenths);
  std::set<std::string> keys;
  std::size_t prose = 0;
  gp::Batch transcribed = batch;
  for (auto& r : transcribed.records) {
    if (r.status != gp::RegionStatus::Excluded) r.status = gp::RegionStatus::Transcribed;
  }
  for (const auto& u : gp::pipeline::grading_units(transcribed, t)) {
    if (gp::trim(u.solution_text).empty()) continue;  // graded without a call
    const auto& w = work.at({u.test_code, u.question_id});
    const auto& q = transcribed.question(u.question_id);
    const auto& def = bank[transcribed.question_index(u.question_id)];
    for (auto kind : {gp::RubricKind::Flexible, gp::RubricKind::Fixed}) {
      const auto& rubric = gp::pipeline::rubric_of_kind(transcribed, q, kind);
      const auto& runs = kind == gp::RubricKind::Flexible ? w.flexible_runs : w.fixed_runs;
      const auto bundle = gp::build_grading_prompt(u.solution_text, u.final_answer_text, q, rubric, templates, ctx.prompt);
      const auto key = gp::ReplayBackend::completion_key(bundle);
      if (!keys.insert(key).second) throw std::logic_error("two grading prompts share a replay key: " + u.test_code);
      for (int i = 0; i < 3; ++i) {
        const bool with_prose = (prose++ % 5) == 3;
        const auto fb = feedback_for(def, w, kind, runs[static_cast<std::size_t>(i)], i);
        gp::write_file(replay / gp::ReplayBackend::fixture_name(key, i), scored_response(runs[static_cast<std::size_t>(i)], fb, with_prose));
      }
    }
  }
}

// dual_rubric

void make_dual_rubric(const fs::path& batch_dir, const fs::path& dir, const gp::TemplateSet& templates) {
  const auto bank = question_bank();
  const auto& def = bank[0];
  gp::QuestionSpec q{def.id, def.statement, def.reference_solution, def.reference_answer, tenths(def.max_tenths),
                     {def.id + "-flexible", def.id + "-fixed"}};
  write_json(dir / "question.json", gp::detail::question_to_json(q));
  const auto flex = gp::load_rubric(batch_dir / "rubrics" / (def.id + "-flexible.json"));
  const auto fixed = gp::load_rubric(batch_dir / "rubrics" / (def.id + "-fixed.json"));
  write_json(dir / "rubrics" / (flex.rubric_id + ".json"), gp::rubric_to_json(flex));
  write_json(dir / "rubrics" / (fixed.rubric_id + ".json"), gp::rubric_to_json(fixed));

  // Correct but informal work: right first term and ratio, an odd
  // intermediate line, and an unsimplified sum.
  const std::string solution =
      "\\sum_{n=3}^{\\infty} \\frac{2^{n-1}}{3^{n+3}} \\quad \\text{geometric}\n"
      "\\frac{r - a^{n+1}}{a^{n}}\n"
      "a = \\frac{2^2}{3^6}, \\quad r = \\frac{2}{3}\n"
      "S = \\frac{a}{1-r} = \\frac{2^2/3^6}{1 - \\frac{2}{3}}";
  const std::string final_answer = "4/243";
  gp::write_file(dir / "solution.txt", solution);
  gp::write_file(dir / "final_answer.txt", final_answer);

  const std::string flexible_feedback =
      "The series is recognized as geometric, with first included term 2^2/3^6 and ratio 2/3, and the infinite-sum "
      "formula is applied to that term. The resulting expression (2^2/3^6)/(1 - 2/3) equals 4/243. One intermediate "
      "line uses nonstandard notation that plays no role in the argument. All key components are present and "
      "correct, so full credit is awarded.";
  const std::string fixed_feedback =
      "Ratio r = 2/3 is correct (1.0 pt). The first term 4/729 is right, but the indexing around it is not stated "
      "consistently (0.5 pt). The sum formula is set up correctly, but the value is left unsimplified and the limit "
      "is not justified (0.5 pt). Total: 1.0 + 0.5 + 0.5 = 2.0.";

  gp::PipelineConfig cfg;
  const auto ctx = gp::pipeline::make_grade_context(cfg, templates, gp::kDefaultGridTenths);
  const fs::path replay = dir / "replay";
  const auto fb = gp::build_grading_prompt(solution, final_answer, q, flex, templates, ctx.prompt);
  const auto xb = gp::build_grading_prompt(solution, final_answer, q, fixed, templates, ctx.prompt);
  gp::write_file(replay / gp::ReplayBackend::fixture_name(gp::ReplayBackend::completion_key(fb), 0),
                 scored_response(30, flexible_feedback, false));
  gp::write_file(replay / gp::ReplayBackend::fixture_name(gp::ReplayBackend::completion_key(xb), 0),
                 scored_response(20, fixed_feedback, true));
}

// figures

void make_figures(const fs::path& dir) {
  std::string gaps = "gap\n";
  for (auto g : figures::global_gaps()) gaps += gp::render_decimal(tenths(std::llabs(g))).insert(0, g < 0 ? "-" : "") + "\n";
  gp::write_file(dir / "global_gaps.csv", gaps);

  auto runs_csv = [](const std::map<std::string, std::vector<gp::Score>>& runs) {
    std::string out = "question,run1,run2,run3\n";
    for (const auto& [k, v] : runs) {
      gp::csv::Row row{k};
      for (const auto& s : v) row.push_back(gp::render_decimal(s));
      out += gp::csv::format_row(row);
    }
    return out;
  };
  gp::write_file(dir / "stability_model_a.csv", runs_csv(figures::stability_model_a()));
  gp::write_file(dir / "stability_model_b.csv", runs_csv(figures::stability_model_b()));
  const auto pair = figures::cross_model_runs();
  gp::write_file(dir / "cross_model_a.csv", runs_csv(pair.a));
  gp::write_file(dir / "cross_model_b.csv", runs_csv(pair.b));
  gp::write_file(dir / "verdicts.csv", gp::format_verdicts_csv(figures::verdict_records(figures::find_verdict_counts())));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regenerate bundled test fixtures"};
  std::string out = "tests/fixtures";
  std::string templates_dir = GRADEPIPE_TEMPLATE_DIR;
  app.add_option("--out", out, "Fixture root")->capture_default_str();
  app.add_option("--templates", templates_dir, "Template directory")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  try {
    const auto templates = gp::TemplateSet::load(templates_dir);
    for (const char* sub : {"batch57", "dual_rubric", "figures"}) fs::remove_all(fs::path(out) / sub);
    make_batch57(fs::path(out) / "batch57", templates);
    make_dual_rubric(fs::path(out) / "batch57", fs::path(out) / "dual_rubric", templates);
    make_figures(fs::path(out) / "figures");
  } catch (const std::exception& e) {
    std::cerr << "make_fixtures: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
