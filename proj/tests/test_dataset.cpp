#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include <maple/dataset.hpp>
#include <maple/log.hpp>

#include "helpers.hpp"

using namespace maple;
using maple::test::TempDir;

namespace {
const std::string kCorpus = std::string(MAPLE_SOURCE_DIR) + "/tests/fixtures/math";
}

TEST_CASE("boxed extraction honors nesting and the box rule", "[dataset]") {
  CHECK(extract_boxed("so $\\boxed{42}$", BoxRule::Last) == "42");
  CHECK(extract_boxed("\\boxed{\\frac{1}{2}}", BoxRule::Last) == "\\frac{1}{2}");
  std::string two = "product $\\boxed{10}$ then sum $\\boxed{14}$";
  CHECK(extract_boxed(two, BoxRule::Last) == "14");
  CHECK(extract_boxed(two, BoxRule::First) == "10");
  CHECK_FALSE(extract_boxed("no box here", BoxRule::Last));
  // escaped brace is literal text, not a box delimiter
  CHECK(extract_boxed("\\boxed{a\\{b\\}c}", BoxRule::Last) == "a\\{b\\}c");
}

TEST_CASE("fixture corpus loads sorted with parsed levels and topics", "[dataset]") {
  std::vector<Problem> problems = load_dataset(kCorpus, {}, {});
  REQUIRE(problems.size() == 32);
  for (size_t i = 1; i < problems.size(); ++i) {
    bool ordered = problems[i - 1].topic < problems[i].topic ||
                   (problems[i - 1].topic == problems[i].topic &&
                    problems[i - 1].id < problems[i].id);
    CHECK(ordered);
  }
  for (const auto& p : problems) {
    CHECK(p.level >= 1);
    CHECK(p.level <= 5);
    CHECK_FALSE(p.question.empty());
    CHECK_FALSE(p.final_answer.empty());
    CHECK(p.id.find('/') != std::string::npos);
  }
}

TEST_CASE("a multi-box reference solution yields the last box as ground truth", "[dataset]") {
  std::vector<Problem> problems = load_dataset(kCorpus, {}, {});
  auto it = std::find_if(problems.begin(), problems.end(),
                         [](const Problem& p) { return p.id == "intermediate_algebra/0008"; });
  REQUIRE(it != problems.end());
  CHECK(it->final_answer == "14");
  CHECK(it->reference_solution.find("\\boxed{10}") != std::string::npos);
}

TEST_CASE("filters select by level and topic", "[dataset]") {
  DatasetFilter level_one;
  level_one.levels = {1};
  std::vector<Problem> l1 = load_dataset(kCorpus, level_one, {});
  CHECK_FALSE(l1.empty());
  for (const auto& p : l1) CHECK(p.level == 1);

  DatasetFilter algebra_only;
  algebra_only.topics = {Topic::Algebra};
  std::vector<Problem> alg = load_dataset(kCorpus, algebra_only, {});
  CHECK_FALSE(alg.empty());
  for (const auto& p : alg) {
    CHECK(p.topic == Topic::Algebra);
    CHECK(p.id.rfind("algebra/", 0) == 0);
  }

  std::vector<Problem> all = load_dataset(kCorpus, {}, {});
  DatasetFilter both;
  both.levels = {1, 2, 3, 4, 5};
  CHECK(load_dataset(kCorpus, both, {}).size() == all.size());
}

TEST_CASE("malformed records are skipped lax, fatal strict", "[dataset]") {
  TempDir dir("dataset");
  std::filesystem::create_directories(dir.path() / "algebra");
  {
    std::ofstream good(dir.path() / "algebra" / "ok.json");
    good << R"({"problem":"What is $1+1$?","level":"Level 1","type":"Algebra",)"
         << R"("solution":"Clearly $1+1=\\boxed{2}$."})";
    std::ofstream bad(dir.path() / "algebra" / "broken.json");
    bad << "{ not json";
    std::ofstream boxless(dir.path() / "algebra" / "boxless.json");
    boxless << R"({"problem":"No answer?","level":"Level 2","type":"Algebra",)"
            << R"("solution":"There is no boxed expression."})";
  }

  WarningCapture warnings;
  std::vector<Problem> lax = load_dataset(dir.str(), {}, {});
  REQUIRE(lax.size() == 2);  // boxless is valid, it just has no ground truth
  CHECK(lax[0].id == "algebra/boxless");
  CHECK(lax[0].final_answer.empty());
  CHECK(lax[1].id == "algebra/ok");
  CHECK(lax[1].final_answer == "2");
  CHECK(warnings.contains("broken"));

  DatasetOptions strict;
  strict.strict = true;
  CHECK_THROWS_AS(load_dataset(dir.str(), {}, strict), Error);
}

TEST_CASE("unknown topic directories fail only when the record names one", "[dataset]") {
  TempDir dir("topic");
  std::filesystem::create_directories(dir.path() / "mystery");
  std::ofstream f(dir.path() / "mystery" / "p.json");
  f << R"({"problem":"Q?","level":"Level 1","type":"Astrology",)"
    << R"("solution":"$\\boxed{1}$"})";
  f.close();

  WarningCapture warnings;
  CHECK(load_dataset(dir.str(), {}, {}).empty());
  CHECK(warnings.contains("Astrology"));
}

TEST_CASE("snapshot round-trips problems exactly", "[dataset]") {
  std::vector<Problem> problems = load_dataset(kCorpus, {}, {});
  TempDir dir("snapshot");
  save_snapshot(problems, dir.path() / "problems.jsonl");
  std::vector<Problem> back = load_snapshot(dir.path() / "problems.jsonl");
  REQUIRE(back.size() == problems.size());
  for (size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].id == problems[i].id);
    CHECK(back[i].question == problems[i].question);
    CHECK(back[i].reference_solution == problems[i].reference_solution);
    CHECK(back[i].final_answer == problems[i].final_answer);
    CHECK(back[i].level == problems[i].level);
    CHECK(back[i].topic == problems[i].topic);
  }
}

TEST_CASE("sampling is seeded and stable", "[dataset]") {
  std::vector<Problem> problems = load_dataset(kCorpus, {}, {});
  std::vector<Problem> s1 = sample_problems(problems, 5, 7);
  std::vector<Problem> s2 = sample_problems(problems, 5, 7);
  REQUIRE(s1.size() == 5);
  for (size_t i = 0; i < 5; ++i) CHECK(s1[i].id == s2[i].id);

  // a sample is drawn from the corpus without duplicates
  std::set<std::string> ids;
  for (const auto& p : s1) ids.insert(p.id);
  CHECK(ids.size() == 5);

  CHECK(sample_problems(problems, 999, 7).size() == problems.size());
}
