#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "watch/report.hpp"

using namespace watch;

namespace {

PlanCovariate pc(std::string name, Evidence e, Direction d,
                 std::string source = "") {
  PlanCovariate c;
  c.name = std::move(name);
  c.evidence = e;
  c.direction = d;
  c.source = std::move(source);
  return c;
}

// Five declared covariates; x9 never reaches the analysis set.
AnalysisPlan demo_plan() {
  AnalysisPlan plan;
  plan.outcome = "y";
  plan.treatment = "trt";
  plan.covariates = {
      pc("x1", Evidence::High, Direction::Positive, "registry meta-analysis"),
      pc("x2", Evidence::None, Direction::Unspecified),
      pc("x3", Evidence::Low, Direction::Negative),
      pc("x4", Evidence::Moderate, Direction::Positive, "phase II subgroup"),
      pc("x9", Evidence::Low, Direction::Positive),
  };
  return plan;
}

const std::vector<std::string> kRanked = {"x1", "x3", "x4", "x2"};
const std::vector<double> kSigned = {2.5, -1.7, -0.4, 0.0};

HetTestResult demo_het() {
  HetTestResult het;
  het.statistic = 3.2;
  het.per_covariate = {{"x1", 3.2}, {"x2", 0.4}, {"x3", 2.1}, {"x4", 1.3}};
  het.p_value = 0.004;
  het.surprise = std::log2(1.0 / het.p_value);
  het.verbal = Verbal::Strong;
  het.n_permutations = 999;
  het.n_exceeding = 3;
  het.seed = 42;
  return het;
}

FindingsData demo_findings() {
  FindingsData d;
  d.config = nlohmann::ordered_json{{"plan", {{"seed", 42}}}, {"threads", 2}};
  d.data_path = "data/trial.csv";
  d.n_rows = 500;
  d.covariates = {"x1", "x2", "x3", "x4"};
  d.dropped = {"x9"};
  d.ate = {0.12, 0.05, 0.022, 0.218};
  d.het = demo_het();
  d.vimp = Eigen::Vector4d(0.5, 0.1, 0.3, 0.2);
  d.ranking = {0, 2, 3, 1};
  d.vint_names = {"x1", "x3"};
  d.vint = Eigen::Matrix2d{{0.5, 0.07}, {0.07, 0.3}};
  d.bootstrap_vimp = Eigen::MatrixXd::Zero(5, 4);
  for (int b = 0; b < 5; ++b)
    for (int j = 0; j < 4; ++j) d.bootstrap_vimp(b, j) = 0.1 * (b + 1) + j;
  d.stability = 0.8;
  d.stability_defined = true;
  d.top_k = 3;
  d.figures = {{"fig_x1", "Effect by x1", "figures/fig_x1.svg",
                "figures/fig_x1.json"}};
  d.credibility =
      credibility_entries(demo_plan(), kRanked, kSigned, Verbal::Strong, 3);
  return d;
}

}  // namespace

TEST_CASE("credibility note: pinned rule-table rows") {
  // the three anchor rows of the rule table
  CHECK(credibility_note(Evidence::High, 1, 10, DirectionMatch::Match,
                         Verbal::Strong) == CredibilityNote::HighCredibility);
  CHECK(credibility_note(Evidence::None, 2, 10, DirectionMatch::Unspecified,
                         Verbal::Low) == CredibilityNote::LowCredibility);
  CHECK(credibility_note(Evidence::Low, 3, 10, DirectionMatch::Unspecified,
                         Verbal::Noteworthy) == CredibilityNote::Unsupported);

  // backed evidence without a confirmed direction (or with weak global
  // evidence) stays Notable rather than HighCredibility
  CHECK(credibility_note(Evidence::Moderate, 1, 10, DirectionMatch::Mismatch,
                         Verbal::VeryStrong) == CredibilityNote::Notable);
  CHECK(credibility_note(Evidence::Moderate, 1, 10, DirectionMatch::Match,
                         Verbal::Moderate) == CredibilityNote::Notable);
  CHECK(credibility_note(Evidence::High, 4, 10, DirectionMatch::Unspecified,
                         Verbal::Strong) == CredibilityNote::Notable);

  // unbacked + strong global evidence: the finding stands unsupported
  CHECK(credibility_note(Evidence::None, 1, 10, DirectionMatch::Match,
                         Verbal::VeryStrong) == CredibilityNote::Unsupported);
  CHECK(credibility_note(Evidence::Low, 2, 10, DirectionMatch::Mismatch,
                         Verbal::Moderate) == CredibilityNote::LowCredibility);
}

TEST_CASE("credibility note: exhaustive rule-table agreement") {
  const Evidence evidences[] = {Evidence::None, Evidence::Low,
                                Evidence::Moderate, Evidence::High};
  const DirectionMatch matches[] = {DirectionMatch::Match,
                                    DirectionMatch::Mismatch,
                                    DirectionMatch::Unspecified};
  const Verbal verbals[] = {Verbal::Low, Verbal::Moderate, Verbal::Noteworthy,
                            Verbal::Strong, Verbal::VeryStrong};
  auto expected = [](Evidence e, DirectionMatch m, Verbal v) {
    const bool backed = e == Evidence::Moderate || e == Evidence::High;
    const bool at_least_noteworthy = v == Verbal::Noteworthy ||
                                     v == Verbal::Strong ||
                                     v == Verbal::VeryStrong;
    if (backed && m == DirectionMatch::Match && at_least_noteworthy)
      return CredibilityNote::HighCredibility;
    if (backed) return CredibilityNote::Notable;
    if (v == Verbal::Low || v == Verbal::Moderate)
      return CredibilityNote::LowCredibility;
    return CredibilityNote::Unsupported;
  };
  for (Evidence e : evidences)
    for (DirectionMatch m : matches)
      for (Verbal v : verbals)
        for (int rank : {1, 5, 10}) {
          CAPTURE(static_cast<int>(e));
          CAPTURE(static_cast<int>(m));
          CAPTURE(static_cast<int>(v));
          CHECK(credibility_note(e, rank, 10, m, v) == expected(e, m, v));
        }
}

TEST_CASE("credibility note: rank outside the top-k throws") {
  CHECK_THROWS_AS(credibility_note(Evidence::High, 0, 10,
                                   DirectionMatch::Match, Verbal::Strong),
                  std::invalid_argument);
  CHECK_THROWS_AS(credibility_note(Evidence::High, 11, 10,
                                   DirectionMatch::Match, Verbal::Strong),
                  std::invalid_argument);
  CHECK_THROWS_AS(credibility_note(Evidence::High, -3, 10,
                                   DirectionMatch::Match, Verbal::Strong),
                  std::invalid_argument);
  CHECK_NOTHROW(credibility_note(Evidence::High, 10, 10,
                                 DirectionMatch::Match, Verbal::Strong));
}

TEST_CASE("note and match names serialize in CamelCase") {
  CHECK(to_string(DirectionMatch::Match) == "Match");
  CHECK(to_string(DirectionMatch::Mismatch) == "Mismatch");
  CHECK(to_string(DirectionMatch::Unspecified) == "Unspecified");
  CHECK(to_string(CredibilityNote::HighCredibility) == "HighCredibility");
  CHECK(to_string(CredibilityNote::Notable) == "Notable");
  CHECK(to_string(CredibilityNote::LowCredibility) == "LowCredibility");
  CHECK(to_string(CredibilityNote::Unsupported) == "Unsupported");
}

TEST_CASE("credibility entries: ranks, matches, notes, sections") {
  const auto entries =
      credibility_entries(demo_plan(), kRanked, kSigned, Verbal::Strong, 3);
  REQUIRE(entries.size() == 5);  // one per plan covariate, plan order
  CHECK(entries[0].name == "x1");
  CHECK(entries[1].name == "x2");
  CHECK(entries[2].name == "x3");
  CHECK(entries[3].name == "x4");
  CHECK(entries[4].name == "x9");

  // x1: rank 1, +2.5 vs declared positive, high evidence, strong global
  CHECK(entries[0].rank == 1);
  CHECK(entries[0].in_top_k);
  CHECK(entries[0].signed_association == 2.5);
  CHECK(entries[0].match == DirectionMatch::Match);
  REQUIRE(entries[0].note.has_value());
  CHECK(*entries[0].note == CredibilityNote::HighCredibility);
  CHECK(entries[0].source == "registry meta-analysis");

  // x3: rank 2, -1.7 vs declared negative, but only low prior evidence
  CHECK(entries[2].rank == 2);
  CHECK(entries[2].match == DirectionMatch::Match);
  REQUIRE(entries[2].note.has_value());
  CHECK(*entries[2].note == CredibilityNote::Unsupported);

  // x4: rank 3 (last of top-3), observed direction contradicts the plan
  CHECK(entries[3].rank == 3);
  CHECK(entries[3].in_top_k);
  CHECK(entries[3].match == DirectionMatch::Mismatch);
  REQUIRE(entries[3].note.has_value());
  CHECK(*entries[3].note == CredibilityNote::Notable);

  // x2: ranked 4th, outside the top-3 -> no note
  CHECK(entries[1].rank == 4);
  CHECK_FALSE(entries[1].in_top_k);
  CHECK_FALSE(entries[1].note.has_value());

  // x9 was dropped before the analysis: rank 0, undefined association
  CHECK(entries[4].rank == 0);
  CHECK_FALSE(entries[4].in_top_k);
  CHECK(std::isnan(entries[4].signed_association));
  CHECK(entries[4].match == DirectionMatch::Unspecified);
  CHECK_FALSE(entries[4].note.has_value());
}

TEST_CASE("credibility entries: weak global evidence flips the notes") {
  const auto entries =
      credibility_entries(demo_plan(), kRanked, kSigned, Verbal::Low, 3);
  // x1 keeps backing but the global signal is weak -> Notable, not High
  CHECK(*entries[0].note == CredibilityNote::Notable);
  // x3: low evidence + weak global signal -> LowCredibility
  CHECK(*entries[2].note == CredibilityNote::LowCredibility);
}

TEST_CASE("credibility entries: zero or undefined association is unmatched") {
  AnalysisPlan plan;
  plan.covariates = {pc("a", Evidence::High, Direction::Positive, "src"),
                     pc("b", Evidence::High, Direction::Negative, "src")};
  const auto entries = credibility_entries(
      plan, {"a", "b"}, {0.0, std::numeric_limits<double>::quiet_NaN()},
      Verbal::Strong, 2);
  CHECK(entries[0].match == DirectionMatch::Unspecified);
  CHECK(entries[1].match == DirectionMatch::Unspecified);
  // unspecified match can never reach HighCredibility
  CHECK(*entries[0].note == CredibilityNote::Notable);
  CHECK(*entries[1].note == CredibilityNote::Notable);
}

TEST_CASE("credibility entries: ranked names outside the plan are ignored") {
  AnalysisPlan plan;
  plan.covariates = {pc("a", Evidence::None, Direction::Unspecified)};
  const auto entries =
      credibility_entries(plan, {"zz", "a"}, {9.0, 1.0}, Verbal::Strong, 1);
  REQUIRE(entries.size() == 1);
  CHECK(entries[0].name == "a");
  CHECK(entries[0].rank == 2);
  CHECK_FALSE(entries[0].in_top_k);
}

TEST_CASE("credibility entries: size mismatch throws") {
  CHECK_THROWS_AS(
      credibility_entries(demo_plan(), kRanked, {1.0, 2.0}, Verbal::Low, 3),
      std::invalid_argument);
}

TEST_CASE("findings json: top-level section order") {
  const auto j = findings_json(demo_findings());
  std::vector<std::string> keys;
  for (const auto& item : j.items()) keys.push_back(item.key());
  const std::vector<std::string> want = {"config",     "dataset", "ate",
                                         "het_test",   "importance",
                                         "displays",   "credibility",
                                         "sensitivity"};
  CHECK(keys == want);
  CHECK(j["sensitivity"].is_array());
  CHECK(j["sensitivity"].empty());
}

TEST_CASE("findings json: dataset, ate and test sections carry the values") {
  const auto d = demo_findings();
  const auto j = findings_json(d);
  CHECK(j["config"]["threads"] == 2);
  CHECK(j["dataset"]["data"] == "data/trial.csv");
  CHECK(j["dataset"]["n_rows"] == 500);
  CHECK(j["dataset"]["covariates"] ==
        nlohmann::ordered_json({"x1", "x2", "x3", "x4"}));
  CHECK(j["dataset"]["dropped_columns"] == nlohmann::ordered_json({"x9"}));
  CHECK(j["ate"]["estimate"] == doctest::Approx(0.12));
  CHECK(j["ate"]["se"] == doctest::Approx(0.05));
  CHECK(j["ate"]["ci_lower"] == doctest::Approx(0.022));
  CHECK(j["ate"]["ci_upper"] == doctest::Approx(0.218));
  CHECK(j["het_test"]["statistic"] == doctest::Approx(3.2));
  CHECK(j["het_test"]["p_value"] == doctest::Approx(0.004));
  CHECK(j["het_test"]["verbal"] == "strong");
  CHECK(j["het_test"]["n_permutations"] == 999);
  CHECK(j["het_test"]["n_exceeding"] == 3);
  CHECK(j["het_test"]["per_covariate"].size() == 4);
  CHECK(j["het_test"]["per_covariate"][0]["name"] == "x1");
  CHECK(j["het_test"]["per_covariate"][0]["statistic"] == doctest::Approx(3.2));
}

TEST_CASE("findings json: importance block") {
  const auto j = findings_json(demo_findings());
  const auto& imp = j["importance"];
  REQUIRE(imp["vimp"].size() == 4);
  CHECK(imp["vimp"][0]["name"] == "x1");
  CHECK(imp["vimp"][0]["importance"] == doctest::Approx(0.5));
  CHECK(imp["ranking"] == nlohmann::ordered_json({"x1", "x3", "x4", "x2"}));
  CHECK(imp["top_k"] == 3);
  CHECK(imp["vint"]["names"] == nlohmann::ordered_json({"x1", "x3"}));
  REQUIRE(imp["vint"]["matrix"].size() == 2);
  CHECK(imp["vint"]["matrix"][0][1] == doctest::Approx(0.07));
  CHECK(imp["vint"]["matrix"][0][0] == doctest::Approx(0.5));  // diag = vimp
  CHECK(imp["bootstrap"]["n_boot"] == 5);
  CHECK(imp["bootstrap"]["vimp"].size() == 5);
  CHECK(imp["bootstrap"]["stability"] == doctest::Approx(0.8));
}

TEST_CASE("findings json: undefined stability serializes as null") {
  auto d = demo_findings();
  d.stability_defined = false;
  const auto j = findings_json(d);
  CHECK(j["importance"]["bootstrap"]["stability"].is_null());
}

TEST_CASE("findings json: credibility entries and null conventions") {
  const auto j = findings_json(demo_findings());
  const auto& cred = j["credibility"];
  REQUIRE(cred.size() == 5);

  std::vector<std::string> keys;
  for (const auto& item : cred[0].items()) keys.push_back(item.key());
  const std::vector<std::string> want = {
      "name",      "evidence", "source", "declared_direction",
      "direction_match", "rank", "in_top_k", "note", "section"};
  CHECK(keys == want);

  CHECK(cred[0]["name"] == "x1");
  CHECK(cred[0]["evidence"] == "high");
  CHECK(cred[0]["declared_direction"] == "positive");
  CHECK(cred[0]["direction_match"] == "Match");
  CHECK(cred[0]["rank"] == 1);
  CHECK(cred[0]["in_top_k"] == true);
  CHECK(cred[0]["note"] == "HighCredibility");
  CHECK(cred[0]["section"] == "findings");

  // x2 declared nothing: no source key at all, null note, consistency section
  CHECK_FALSE(cred[1].contains("source"));
  CHECK(cred[1]["evidence"] == "none");
  CHECK(cred[1]["declared_direction"] == "unspecified");
  CHECK(cred[1]["rank"] == 4);
  CHECK(cred[1]["note"].is_null());
  CHECK(cred[1]["section"] == "consistency");

  // dropped covariate: rank is null, never a note
  CHECK(cred[4]["name"] == "x9");
  CHECK(cred[4]["rank"].is_null());
  CHECK(cred[4]["in_top_k"] == false);
  CHECK(cred[4]["note"].is_null());
  CHECK(cred[4]["section"] == "consistency");
}

TEST_CASE("findings json: serialization round trip is stable") {
  const auto d = demo_findings();
  const std::string once = findings_json(d).dump(2);
  const std::string twice = findings_json(d).dump(2);
  CHECK(once == twice);
  CHECK_NOTHROW(nlohmann::json::parse(once));
}

TEST_CASE("findings markdown: global test leads, no decision language") {
  const auto md = findings_markdown(demo_findings());
  const auto p_pos = md.find("p = 0.004");
  const auto verbal_pos = md.find("**strong**");
  const auto rank_pos = md.find("| rank | covariate |");
  REQUIRE(p_pos != std::string::npos);
  REQUIRE(verbal_pos != std::string::npos);
  REQUIRE(rank_pos != std::string::npos);
  CHECK(p_pos < rank_pos);
  CHECK(verbal_pos < rank_pos);
  CHECK(md.find("continuum") != std::string::npos);
  // the template never issues test decisions
  CHECK(md.find("significan") == std::string::npos);
  CHECK(md.find("reject the null") == std::string::npos);
}

TEST_CASE("findings markdown: caution block only under weak evidence") {
  auto d = demo_findings();
  CHECK(findings_markdown(d).find("Caution") == std::string::npos);

  d.het.p_value = 0.4;
  d.het.verbal = Verbal::Low;
  d.het.surprise = std::log2(1.0 / 0.4);
  const auto md = findings_markdown(d);
  CHECK(md.find("Caution") != std::string::npos);
  CHECK(md.find("low-credibility") != std::string::npos);
}

TEST_CASE("findings markdown: sections, stability and consistency list") {
  auto d = demo_findings();
  auto md = findings_markdown(d);
  // ranking table lists the top-3, best first
  CHECK(md.find("| 1 | x1 |") != std::string::npos);
  CHECK(md.find("| 2 | x3 |") != std::string::npos);
  CHECK(md.find("| 3 | x4 |") != std::string::npos);
  CHECK(md.find("| 4 |") == std::string::npos);
  CHECK(md.find("0.8") != std::string::npos);  // stability value
  // non-top declared covariates end up in the consistency section
  const auto cons_pos = md.find("Consistency check");
  REQUIRE(cons_pos != std::string::npos);
  CHECK(md.find("- x2 (evidence none)", cons_pos) != std::string::npos);
  CHECK(md.find("- x9 (evidence low)", cons_pos) != std::string::npos);
  CHECK(md.find("rank none", cons_pos) != std::string::npos);
  CHECK(md.find("Annotation rules") != std::string::npos);
  // figure manifest is listed with both file paths
  CHECK(md.find("figures/fig_x1.svg") != std::string::npos);
  CHECK(md.find("figures/fig_x1.json") != std::string::npos);

  d.stability_defined = false;
  md = findings_markdown(d);
  CHECK(md.find("undefined") != std::string::npos);

  d.figures.clear();
  md = findings_markdown(d);
  CHECK(md.find("Descriptive displays") == std::string::npos);
}
