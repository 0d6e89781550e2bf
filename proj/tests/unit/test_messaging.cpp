#include <gtest/gtest.h>

#include "gradepipe/messaging.hpp"
#include "support/testkit.hpp"

using namespace gradepipe;
using testkit::result;
using testkit::templates;
namespace fs = std::filesystem;

namespace {

std::vector<ResultRecord> two_questions() {
  return {result("maple42", "q2", 1, 20, 50), result("maple42", "q1", 0, 50, 50)};
}

}  // namespace

TEST(Message, TotalsDisplayedPoints) {
  const auto m = render_message(two_questions(), "Robin", MessagePolicy{}, templates());
  EXPECT_EQ(m.total.tenths(), 70);
  EXPECT_FALSE(m.provisional);
  ASSERT_EQ(m.per_question.size(), 2u);
  EXPECT_EQ(m.per_question[0].question_id, "q1");
  EXPECT_EQ(m.per_question[0].number, 1);
  const auto text = format_message(m, templates());
  EXPECT_NE(text.find("Dear Robin,"), std::string::npos);
  EXPECT_NE(text.find("Question 1:\n\nPoints: 5\n\nEvaluation: Feedback for maple42 q1."), std::string::npos);
  EXPECT_NE(text.find("Question 2:\n\nPoints: 2\n"), std::string::npos);
  EXPECT_NE(text.find("Total Score: 7\n"), std::string::npos);
  EXPECT_LT(text.find("Question 1:"), text.find("Question 2:"));
}

TEST(Message, DisclaimerIsVerbatim) {
  const auto text = format_message(render_message(two_questions(), "Robin", MessagePolicy{}, templates()), templates());
  EXPECT_NE(text.find("Please note: AI grading is for reference only. Scores assigned by your TA in Gradescope are the "
                      "official scores."),
            std::string::npos);
  EXPECT_NE(text.find("Because LLMs are probabilistic, occasional mistakes can occur."), std::string::npos);
}

TEST(Message, NoQuestions) {
  const auto m = render_message({}, "Robin", MessagePolicy{}, templates());
  EXPECT_TRUE(m.per_question.empty());
  EXPECT_EQ(m.total.tenths(), 0);
  EXPECT_NE(format_message(m, templates()).find("Total Score: 0\n"), std::string::npos);
}

TEST(Message, WithheldSectionIsPendingAndTotalProvisional) {
  auto rs = two_questions();
  rs[1].outcome.flags.push_back(Flag{FlagKind::FullCreditSplit});
  const auto m = render_message(rs, "Robin", MessagePolicy{}, templates());
  EXPECT_TRUE(m.provisional);
  EXPECT_TRUE(m.per_question[0].pending_review);
  EXPECT_EQ(m.total.tenths(), 20);
  const auto text = format_message(m, templates());
  EXPECT_NE(text.find("Question 1:\n\nPoints: pending human review"), std::string::npos);
  EXPECT_EQ(text.find("Feedback for maple42 q1."), std::string::npos);
  EXPECT_NE(text.find("Total Score: 2 (provisional; some questions are pending human review)"), std::string::npos);
}

TEST(Message, PolicyCanReleaseFlaggedItems) {
  auto rs = two_questions();
  rs[1].outcome.flags.push_back(Flag{FlagKind::HighVariance, 7.0});
  MessagePolicy release;
  release.withhold_flagged = false;
  const auto m = render_message(rs, "Robin", release, templates());
  EXPECT_FALSE(m.provisional);
  EXPECT_EQ(m.total.tenths(), 70);
  MessagePolicy narrow;
  narrow.withhold_flags = {FlagKind::FullCreditSplit};
  EXPECT_FALSE(render_message(rs, "Robin", narrow, templates()).provisional);
}

TEST(Message, DuplicateQuestionRejected) {
  std::vector<ResultRecord> rs{result("a1", "q1", 0, 10, 30), result("a1", "q1", 0, 20, 30)};
  EXPECT_THROW(render_message(rs, "x", MessagePolicy{}, templates()), DuplicateQuestion);
}

TEST(Message, MissingRosterNameFallsBack) {
  EXPECT_EQ(render_message(two_questions(), "", MessagePolicy{}, templates()).salutation_name, "Student");
  EXPECT_EQ(render_message(two_questions(), "  ", MessagePolicy{}, templates()).salutation_name, "Student");
}

TEST(MessageProperty, TotalEqualsSumOfDisplayedSections) {
  std::mt19937 rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ResultRecord> rs;
    const int n = static_cast<int>(rng() % 6);
    for (int q = 0; q < n; ++q) {
      auto r = result("s", "q" + std::to_string(q), q, static_cast<std::int64_t>(rng() % 51), 50);
      if (rng() % 3 == 0) r.outcome.flags.push_back(Flag{FlagKind::OffGridScore});
      rs.push_back(r);
    }
    const auto m = render_message(rs, "x", MessagePolicy{}, templates());
    std::int64_t sum = 0;
    bool any_pending = false;
    for (const auto& s : m.per_question) {
      if (s.pending_review) any_pending = true;
      else sum += s.points.tenths();
    }
    EXPECT_EQ(m.total.tenths(), sum);
    EXPECT_EQ(m.provisional, any_pending);
  }
}

TEST(Roster, ParsesAndNormalizes) {
  const auto r = parse_roster("test_code,name\n MAPLE42 , Robin Park \n");
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r.at(normalize_test_code("maple42")), "Robin Park");
  EXPECT_THROW(parse_roster("code,name\nx,y\n"), ParseError);
}

TEST(Message, FileNamesAreSanitized) {
  EXPECT_EQ(message_file_name("maple42"), "maple42.txt");
  EXPECT_EQ(message_file_name("../etc/x"), "___etc_x.txt");
  EXPECT_EQ(message_file_name(" a b "), "a_b.txt");
  EXPECT_EQ(message_file_name(""), "_.txt");
}

TEST(Export, WritesFilesAndIndex) {
  testkit::TempDir dir("msg");
  auto rs = two_questions();
  auto other = result("oak07", "q1", 0, 30, 50);
  other.outcome.flags.push_back(Flag{FlagKind::OcrSuspect});
  rs.push_back(other);
  export_messages(rs, parse_roster("test_code,name\nmaple42,Robin\n"), MessagePolicy{}, templates(), dir.path());
  EXPECT_EQ(read_file(dir / "index.csv"),
            "test_code,file,total,provisional_flag\nmaple42,maple42.txt,7,false\noak07,oak07.txt,0,true\n");
  EXPECT_NE(read_file(dir / "maple42.txt").find("Dear Robin,"), std::string::npos);
  EXPECT_NE(read_file(dir / "oak07.txt").find("Dear Student,"), std::string::npos);
}

TEST(Export, GoldenMessage) {
  testkit::TempDir dir("msg");
  const auto golden = testkit::fixture_dir() / "message_golden";
  const auto n = pipeline::run_message(golden / "results.jsonl", golden / "roster.csv", dir.path(), PipelineConfig{}, templates());
  EXPECT_EQ(n, 1u);
  EXPECT_EQ(read_file(dir / "maple42.txt"), read_file(golden / "expected" / "maple42.txt"));
  const auto prov = json::parse(read_file(dir / "provenance.json"));
  EXPECT_EQ(prov["files"]["maple42.txt"], sha256_hex(read_file(dir / "maple42.txt")));
  EXPECT_EQ(prov["message_template_version"], templates().version());
}
