#include <gtest/gtest.h>

#include <random>

#include "gradepipe/core.hpp"
#include "gradepipe/csv.hpp"
#include "gradepipe/digest.hpp"
#include "gradepipe/json_io.hpp"

using namespace gradepipe;

TEST(Score, ParsesGridValue) {
  const Score s = score_from_decimal("2.5");
  EXPECT_EQ(s.tenths(), 25);
  EXPECT_FALSE(s.off_grid());
}

TEST(Score, ParsesZero) {
  const Score s = score_from_decimal("0");
  EXPECT_EQ(s.tenths(), 0);
  EXPECT_FALSE(s.off_grid());
}

TEST(Score, MarksOffGridValue) {
  const Score s = score_from_decimal("2.3");
  EXPECT_EQ(s.tenths(), 23);
  EXPECT_TRUE(s.off_grid());
}

TEST(Score, OffGridIsRelativeToGrid) {
  EXPECT_FALSE(score_from_decimal("2.3", 1).off_grid());
  EXPECT_TRUE(score_from_decimal("2.5", 10).off_grid());
}

TEST(Score, RejectsMalformedText) {
  for (const char* bad : {"", "abc", "-1", "-0.5", "2.55", "1.", ".5", "1e3", "2,5", "+3"}) {
    EXPECT_THROW(score_from_decimal(bad), ParseError) << bad;
  }
}

TEST(Score, ToleratesSurroundingWhitespace) { EXPECT_EQ(score_from_decimal(" 3.5 ").tenths(), 35); }

TEST(Score, NegativeTenthsNeverConstructed) {
  EXPECT_THROW(Score::from_tenths(-1), ValidationError);
  EXPECT_THROW(Score::from_tenths(5, 0), ValidationError);
}

TEST(Score, ComparesByValueOnly) {
  EXPECT_EQ(Score::from_tenths(10, 5), Score::from_tenths(10, 3));
  EXPECT_LT(Score::from_tenths(5), Score::from_tenths(10));
}

TEST(Score, RenderDecimal) {
  EXPECT_EQ(render_decimal(Score::from_tenths(0)), "0");
  EXPECT_EQ(render_decimal(Score::from_tenths(30)), "3");
  EXPECT_EQ(render_decimal(Score::from_tenths(25)), "2.5");
  EXPECT_EQ(render_decimal(Score::from_tenths(3, 1)), "0.3");
}

TEST(ScoreProperty, RenderThenParseIsIdentityOnGrid) {
  for (std::int64_t t = 0; t <= 1000; t += 5) {
    const Score s = Score::from_tenths(t);
    const Score back = score_from_decimal(render_decimal(s));
    EXPECT_EQ(back.tenths(), t);
    EXPECT_FALSE(back.off_grid());
  }
}

TEST(ScoreGap, Examples) {
  EXPECT_EQ(score_gap(Score::from_tenths(30), Score::from_tenths(30)), 0);
  EXPECT_EQ(score_gap(Score::from_tenths(20), Score::from_tenths(30)), -10);
  EXPECT_EQ(score_gap(Score::from_tenths(50), Score::from_tenths(20)), 30);
}

TEST(ScoreGapProperty, Antisymmetric) {
  std::mt19937 rng(7);
  for (int i = 0; i < 2000; ++i) {
    const Score a = Score::from_tenths(rng() % 101, 1), b = Score::from_tenths(rng() % 101, 1);
    EXPECT_EQ(score_gap(a, b), -score_gap(b, a));
  }
}

TEST(ScoreJson, AcceptsNumbersAndStrings) {
  EXPECT_EQ(score_from_json(json(3)).tenths(), 30);
  EXPECT_EQ(score_from_json(json(2.5)).tenths(), 25);
  EXPECT_EQ(score_from_json(json("1.5")).tenths(), 15);
  EXPECT_THROW(score_from_json(json(-1)), Error);
  EXPECT_THROW(score_from_json(json(nullptr)), ParseError);
}

TEST(ScoreJson, RoundTrips) {
  for (std::int64_t t = 0; t <= 100; ++t) {
    EXPECT_EQ(score_from_json(score_to_json(Score::from_tenths(t, 1)), 1).tenths(), t);
  }
}

TEST(QuestionSpecValidation, RejectsEmptyId) {
  QuestionSpec q{"", "stmt", "", "", Score::from_tenths(30), {}};
  EXPECT_THROW(validate(q), Error);
}

TEST(TestCode, NormalizesCaseAndWhitespace) {
  EXPECT_EQ(normalize_test_code(" a1b2 "), normalize_test_code("A1B2"));
  EXPECT_NE(normalize_test_code("a1b2"), normalize_test_code("a1b3"));
}

TEST(Csv, ParsesQuotedFields) {
  const auto rows = csv::parse("a,b\n\"x, y\",\"he said \"\"hi\"\"\"\r\nlast,\n");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1][0], "x, y");
  EXPECT_EQ(rows[1][1], "he said \"hi\"");
  EXPECT_EQ(rows[2][1], "");
}

TEST(Csv, StripsByteOrderMark) {
  csv::Table t("\xEF\xBB\xBFtest_code,name\nabc,Avery\n", {"test_code", "name"});
  EXPECT_EQ(t.at(0, "name"), "Avery");
}

TEST(Csv, MissingColumnIsAnError) { EXPECT_THROW(csv::Table("a,b\n1,2\n", {"a", "c"}), ParseError); }

TEST(Csv, UnterminatedQuoteIsAnError) { EXPECT_THROW(csv::parse("a\n\"open\n"), ParseError); }

TEST(Csv, FormatThenParseRoundTrips) {
  const csv::Row row{"plain", "with,comma", "with \"quote\"", "multi\nline", ""};
  const auto rows = csv::parse(csv::format_row(row));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0], row);
}

TEST(Digest, KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(base64_encode("Man"), "TWFu");
  EXPECT_EQ(base64_encode("Ma"), "TWE=");
}

TEST(Errors, ExitCodesByCategory) {
  EXPECT_EQ(exit_code_for(ErrorCategory::Validation), 2);
  EXPECT_EQ(exit_code_for(ErrorCategory::Backend), 3);
  EXPECT_EQ(exit_code_for(ErrorCategory::Io), 4);
  EXPECT_EQ(ParseError("x").category(), ErrorCategory::Validation);
  EXPECT_EQ(TransportError("x").category(), ErrorCategory::Backend);
  EXPECT_EQ(IoError("x").category(), ErrorCategory::Io);
  EXPECT_EQ(std::string(DuplicateRegion("x").code()), "DuplicateRegion");
}
