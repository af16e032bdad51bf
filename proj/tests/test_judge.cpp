#include <catch2/catch_amalgamated.hpp>

#include <maple/judge.hpp>
#include <maple/log.hpp>
#include <maple/prompt.hpp>
#include <maple/stage1.hpp>

#include "helpers.hpp"

using namespace maple;
using maple::test::FakeChatProvider;
using maple::test::TempDir;

namespace {

StepLabels sample_labels() {
  StepLabels s;
  s.problem_id = "algebra/p1";
  s.model_id = "m1";
  s.per_step = {{},
                {ErrorLabel::CalculationError, ErrorLabel::IncorrectlyAppliedMethod},
                {ErrorLabel::IncoherentOutput}};
  s.solution_scope = {ErrorLabel::IncoherentOutput};
  return s;
}

Problem judged_problem() {
  Problem p;
  p.id = "algebra/p1";
  p.question = "Solve $2x = 6$.";
  p.reference_solution = "Divide by 2: $x = \\boxed{3}$.";
  p.final_answer = "3";
  p.level = 1;
  p.topic = Topic::Algebra;
  return p;
}

const std::string kJudgeTemplate =
    "Labels:\n{labels_with_descriptions}\nQ: {question}\nRef: {reference_solution}\n"
    "Steps:\n{generated_steps}\nReply per step.";

}  // namespace

TEST_CASE("formatting writes one line per step plus the scope line", "[judge]") {
  std::string text = format_step_labels(sample_labels());
  CHECK(text ==
        "step 1: NONE\n"
        "step 2: Calculation Error, Incorrectly Applied Method\n"
        "step 3: Incoherent Output\n"
        "solution: Incoherent Output\n");

  StepLabels no_scope;
  no_scope.per_step = {{ErrorLabel::CalculationError}};
  CHECK(format_step_labels(no_scope) == "step 1: Calculation Error\n");
}

TEST_CASE("format then parse reproduces the labels", "[judge]") {
  StepLabels s = sample_labels();
  auto parsed = parse_step_labels(s.problem_id, s.model_id, format_step_labels(s),
                                  s.per_step.size());
  REQUIRE(parsed);
  CHECK(parsed->per_step == s.per_step);
  CHECK(parsed->solution_scope == s.solution_scope);
  CHECK(format_step_labels(*parsed) == format_step_labels(s));
}

TEST_CASE("parsing tolerates real-world reply noise", "[judge]") {
  auto parsed = parse_step_labels("p", "m",
                                  "Here is my assessment.\n"
                                  "Step 1. no errors\n"
                                  "step #2: arithmetic error; misapplied method\n"
                                  "STEP 3 : Calculation Error, calculation error\n"
                                  "Some closing remark.\n",
                                  3);
  REQUIRE(parsed);
  CHECK(parsed->per_step[0].empty());
  CHECK(parsed->per_step[1] ==
        std::vector<ErrorLabel>{ErrorLabel::CalculationError,
                                ErrorLabel::IncorrectlyAppliedMethod});
  CHECK(parsed->per_step[2] == std::vector<ErrorLabel>{ErrorLabel::CalculationError});
  CHECK(parsed->solution_scope.empty());
}

TEST_CASE("scope labels on a step are copied, never hoisted", "[judge]") {
  auto parsed = parse_step_labels("p", "m", "step 1: Incoherent Output\nstep 2: NONE\n", 2);
  REQUIRE(parsed);
  CHECK(parsed->per_step[0] == std::vector<ErrorLabel>{ErrorLabel::IncoherentOutput});
  CHECK(parsed->solution_scope == std::vector<ErrorLabel>{ErrorLabel::IncoherentOutput});
}

TEST_CASE("a reply with no step lines is malformed, not empty", "[judge]") {
  CHECK_FALSE(parse_step_labels("p", "m", "The reasoning looks flawed overall.", 2));
  CHECK_FALSE(parse_step_labels("p", "m", "", 2));
}

TEST_CASE("unknown labels are a hard error", "[judge]") {
  try {
    parse_step_labels("p", "m", "step 1: Quantum Drift\n", 1);
    FAIL("expected an unknown-label error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownLabel);
    CHECK(e.exit_code() == 3);
    CHECK(std::string(e.what()).find("Quantum Drift") != std::string::npos);
  }
}

TEST_CASE("out-of-range and omitted steps warn without failing", "[judge]") {
  WarningCapture warnings;
  auto parsed = parse_step_labels("p", "m", "step 1: NONE\nstep 7: Calculation Error\n", 2);
  REQUIRE(parsed);
  CHECK(parsed->per_step.size() == 2);
  CHECK(parsed->per_step[1].empty());
  CHECK(warnings.contains("nonexistent step 7"));
  CHECK(warnings.contains("omitted step 2"));
}

TEST_CASE("judge_solution builds the prompt and re-prompts once", "[judge]") {
  TempDir cache("judge");
  Taxonomy taxonomy;
  Problem p = judged_problem();
  GeneratedSolution sol = make_solution(p.id, "m1", "I divide both sides.\n\nSo $x = 4$.");

  SECTION("well-formed first reply") {
    auto provider = std::make_shared<FakeChatProvider>(
        [&](const ModelConfig&, const std::vector<ChatTurn>& turns) -> std::string {
          REQUIRE(turns.size() == 1);
          CHECK(turns[0].content.find("Solve $2x = 6$.") != std::string::npos);
          CHECK(turns[0].content.find("Step 1:") != std::string::npos);
          CHECK(turns[0].content.find("Calculation Error") != std::string::npos);
          return "step 1: NONE\nstep 2: Calculation Error";
        });
    Gateway gw(maple::test::fast_gateway_options(cache.path()), provider);
    StepLabels labels = judge_solution(p, sol, taxonomy, gw, maple::test::test_model("judge"),
                                       kJudgeTemplate);
    CHECK(labels.per_step[1] == std::vector<ErrorLabel>{ErrorLabel::CalculationError});
    CHECK(provider->calls == 1);
  }

  SECTION("malformed reply triggers exactly one re-prompt") {
    auto provider = std::make_shared<FakeChatProvider>(
        [&](const ModelConfig&, const std::vector<ChatTurn>& turns) -> std::string {
          if (turns.size() == 1) return "It seems broadly wrong from the start.";
          REQUIRE(turns.size() == 3);
          CHECK(turns[2].content.find("did not follow the required format") !=
                std::string::npos);
          return "step 1: Complete Misunderstanding\nstep 2: NONE";
        });
    Gateway gw(maple::test::fast_gateway_options(cache.path()), provider);
    StepLabels labels = judge_solution(p, sol, taxonomy, gw, maple::test::test_model("judge"),
                                       kJudgeTemplate);
    CHECK(labels.per_step[0] ==
          std::vector<ErrorLabel>{ErrorLabel::CompleteMisunderstanding});
    CHECK(provider->calls == 2);
  }

  SECTION("two malformed replies exhaust the parser") {
    auto provider = std::make_shared<FakeChatProvider>("never the right shape");
    Gateway gw(maple::test::fast_gateway_options(cache.path()), provider);
    try {
      judge_solution(p, sol, taxonomy, gw, maple::test::test_model("judge"), kJudgeTemplate);
      FAIL("expected a judge-parse error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::JudgeParse);
    }
    CHECK(provider->calls == 2);
  }

  SECTION("template must carry all four placeholders") {
    auto provider = std::make_shared<FakeChatProvider>("step 1: NONE");
    Gateway gw(maple::test::fast_gateway_options(cache.path()), provider);
    CHECK_THROWS_AS(judge_solution(p, sol, taxonomy, gw, maple::test::test_model("judge"),
                                   "only {question} here"),
                    Error);
    CHECK(provider->calls == 0);
  }

  SECTION("a step-less solution cannot be judged") {
    GeneratedSolution none = make_solution(p.id, "m1", "");
    auto provider = std::make_shared<FakeChatProvider>("step 1: NONE");
    Gateway gw(maple::test::fast_gateway_options(cache.path()), provider);
    CHECK_THROWS_AS(judge_solution(p, none, taxonomy, gw, maple::test::test_model("judge"),
                                   kJudgeTemplate),
                    Error);
  }
}

TEST_CASE("alignment metrics agree with hand computation", "[judge]") {
  // Two problems, five steps total. Hand-derived below.
  StepLabels pred1, anno1, pred2, anno2;
  pred1.problem_id = anno1.problem_id = "p1";
  pred2.problem_id = anno2.problem_id = "p2";
  pred1.per_step = {{ErrorLabel::CalculationError}, {}};
  anno1.per_step = {{ErrorLabel::CalculationError}, {ErrorLabel::IncorrectMethod}};
  pred2.per_step = {{ErrorLabel::CalculationError, ErrorLabel::IncorrectlyAppliedMethod},
                    {},
                    {ErrorLabel::NoSolution}};
  anno2.per_step = {{ErrorLabel::CalculationError}, {}, {ErrorLabel::NoSolution}};

  AlignmentReport r = alignment_accuracy({pred1, pred2}, {anno1, anno2});
  CHECK(r.compared_steps == 5);
  // exact matches: p1 step1, p2 step2, p2 step3
  CHECK(r.exact_match_rate == Catch::Approx(3.0 / 5.0).epsilon(1e-12));
  // jaccard: 1, 0, 1/2, 1, 1  -> mean 0.7
  CHECK(r.jaccard_mean == Catch::Approx(0.7).epsilon(1e-12));
  // per-label: CalculationError agrees on all five steps; IncorrectMethod on 4;
  // IncorrectlyAppliedMethod on 4; the rest everywhere.
  CHECK(r.per_label_accuracy.at(ErrorLabel::CalculationError) == Catch::Approx(1.0));
  CHECK(r.per_label_accuracy.at(ErrorLabel::IncorrectMethod) ==
        Catch::Approx(4.0 / 5.0).epsilon(1e-12));
  CHECK(r.per_label_accuracy.at(ErrorLabel::IncorrectlyAppliedMethod) ==
        Catch::Approx(4.0 / 5.0).epsilon(1e-12));
  CHECK(r.per_label_accuracy.at(ErrorLabel::NoSolution) == Catch::Approx(1.0));
  CHECK(r.mismatches.size() == 2);

  AlignmentReport self = alignment_accuracy({pred1, pred2}, {pred1, pred2});
  CHECK(self.exact_match_rate == 1.0);
  CHECK(self.jaccard_mean == 1.0);
  for (ErrorLabel l : kAllLabels) CHECK(self.per_label_accuracy.at(l) == 1.0);
}

TEST_CASE("alignment pairing failures are loud", "[judge]") {
  StepLabels pred, anno, anno_other;
  pred.problem_id = "p1";
  pred.per_step = {{}};
  anno.problem_id = "p1";
  anno.per_step = {{}, {}};
  anno_other.problem_id = "p2";
  anno_other.per_step = {{}};

  CHECK_THROWS_AS(alignment_accuracy({pred}, {anno_other}), Error);  // unpaired
  CHECK_THROWS_AS(alignment_accuracy({pred}, {anno}), Error);        // step-count mismatch
}

TEST_CASE("annotation files round-trip", "[judge]") {
  TempDir dir("annotations");
  std::vector<StepLabels> records{sample_labels()};
  records[0].model_id = "m1";
  StepLabels second;
  second.problem_id = "geometry/p7";
  second.per_step = {{ErrorLabel::PartialMisunderstanding}, {}};
  records.push_back(second);

  std::string path = dir.file("toy.txt");
  save_annotations(path, records);
  std::vector<StepLabels> back = load_annotations(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].problem_id == records[0].problem_id);
  CHECK(back[0].model_id == "m1");
  CHECK(back[0].per_step == records[0].per_step);
  CHECK(back[0].solution_scope == records[0].solution_scope);
  CHECK(back[1].per_step == records[1].per_step);
  CHECK(back[1].model_id.empty());
}

TEST_CASE("annotation loader rejects junk", "[judge]") {
  TempDir dir("annotations-bad");
  std::string path = dir.file("bad.txt");
  write_text_file(path, "problem: p1\nthis line is not a judge line\n");
  CHECK_THROWS_AS(load_annotations(path), Error);
  write_text_file(path, "");
  CHECK_THROWS_AS(load_annotations(path), Error);
}
