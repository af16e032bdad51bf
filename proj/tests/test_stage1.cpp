#include <catch2/catch_amalgamated.hpp>

#include <maple/log.hpp>
#include <maple/stage1.hpp>

#include "helpers.hpp"

using namespace maple;
using maple::test::FakeChatProvider;
using maple::test::TempDir;

namespace {

Problem make_problem(const std::string& id = "algebra/p1") {
  Problem p;
  p.id = id;
  p.question = "What is $1+1$?";
  p.reference_solution = "Adding, $1+1=\\boxed{2}$.";
  p.final_answer = "2";
  p.level = 1;
  p.topic = Topic::Algebra;
  return p;
}

}  // namespace

TEST_CASE("split_steps honors blank lines and step markers", "[stage1]") {
  CHECK(split_steps("").empty());
  CHECK(split_steps("  \n \n").empty());

  auto paragraphs = split_steps("First paragraph.\n\nSecond paragraph.");
  REQUIRE(paragraphs.size() == 2);
  CHECK(paragraphs[0] == "First paragraph.");
  CHECK(paragraphs[1] == "Second paragraph.");

  auto numbered = split_steps("Step 1: restate.\nStep 2: compute.\nStep 3: conclude.");
  REQUIRE(numbered.size() == 3);
  CHECK(numbered[1] == "Step 2: compute.");

  auto enumerated = split_steps("1. restate\n2. compute");
  REQUIRE(enumerated.size() == 2);

  // a marker mid-paragraph still opens a new step
  auto mixed = split_steps("Intro line\nStep 1: begin\ncontinued\n\ntail");
  REQUIRE(mixed.size() == 3);
  CHECK(mixed[0] == "Intro line");
  CHECK(mixed[1] == "Step 1: begin\ncontinued");
  CHECK(mixed[2] == "tail");
}

TEST_CASE("split_steps never cuts display math", "[stage1]") {
  std::string text =
      "Consider the system\n\\[\nx + y = 2\n\n   \nx - y = 0\n\\]\nwhich we solve.\n\n"
      "Hence $x = y = 1$.";
  auto steps = split_steps(text);
  REQUIRE(steps.size() == 2);
  CHECK(steps[0].find("x - y = 0") != std::string::npos);
  CHECK(steps[1] == "Hence $x = y = 1$.");

  std::string aligned = "We compute\n\\begin{align}\na &= 1\\\\\n\nb &= 2\n\\end{align}\ndone.\n";
  CHECK(split_steps(aligned).size() == 1);
}

TEST_CASE("joining split steps preserves non-blank content", "[stage1]") {
  std::string text = "alpha\nbeta\n\n\ngamma\n\ndelta epsilon";
  auto steps = split_steps(text);
  std::string joined = join(steps, "\n");
  for (std::string_view token : {"alpha", "beta", "gamma", "delta epsilon"})
    CHECK(joined.find(token) != std::string::npos);
}

TEST_CASE("trailing answer heuristic reads only the last line", "[stage1]") {
  CHECK(trailing_answer("Work...\nThe answer is 42.") == "42");
  CHECK(trailing_answer("Final answer: x=3") == "x=3");
  CHECK(trailing_answer("answer = 7") == "7");
  CHECK(trailing_answer("The answer is **12**.") == "12");
  CHECK_FALSE(trailing_answer("The answer is 42.\nBut wait, more text."));
  CHECK_FALSE(trailing_answer("No answer sentence here."));
}

TEST_CASE("boxed extraction wins over the trailing heuristic", "[stage1]") {
  CHECK(extract_final_answer("So $\\boxed{9}$\nthe answer is 7.") == "9");
  CHECK(extract_final_answer("steps $\\boxed{9}$ more") == "9");
  // malformed box falls back instead of failing
  CHECK(extract_final_answer("\\boxed{unclosed\nThe answer is 5.") == "5");
}

TEST_CASE("incoherence detector fires on degenerate repetition only", "[stage1]") {
  std::string junk;
  for (int i = 0; i < 40; ++i) junk += "so the answer must be ";
  CHECK(looks_incoherent(junk));
  CHECK_FALSE(looks_incoherent("A normal short sentence."));
  std::string essay;
  for (int i = 0; i < 30; ++i) essay += "word" + std::to_string(i) + " ";
  CHECK_FALSE(looks_incoherent(essay));
}

TEST_CASE("make_solution assembles steps, answer, and the degenerate flag", "[stage1]") {
  GeneratedSolution g =
      make_solution("p", "m", "Work out the sum.\n\nSo the final answer is $\\boxed{4}$.");
  CHECK(g.steps.size() == 2);
  CHECK(g.extracted_final_answer == "4");
  CHECK_FALSE(g.degenerate_incoherent);

  GeneratedSolution empty = make_solution("p", "m", "");
  CHECK(empty.steps.empty());
  CHECK_FALSE(empty.extracted_final_answer);
}

TEST_CASE("verify maps answer presence and equivalence to an outcome", "[stage1]") {
  Problem p = make_problem();
  GeneratedSolution right = make_solution(p.id, "m", "thus $\\boxed{2}$");
  GeneratedSolution wrong = make_solution(p.id, "m", "thus $\\boxed{3}$");
  GeneratedSolution silent = make_solution(p.id, "m", "no answer given here");

  VerificationOutcome ok = verify(p, right);
  CHECK(ok.correct);
  REQUIRE(ok.method);
  CHECK(*ok.method == MatchMethod::Exact);
  CHECK_FALSE(verify(p, wrong).correct);
  CHECK_FALSE(verify(p, silent).correct);
  CHECK_FALSE(verify(p, silent).method);
}

TEST_CASE("generation renders the template and splits the reply", "[stage1]") {
  TempDir cache("gen");
  auto provider = std::make_shared<FakeChatProvider>(
      [](const ModelConfig&, const std::vector<ChatTurn>& turns) -> std::string {
        REQUIRE(turns.size() == 1);
        CHECK(turns[0].content.find("What is $1+1$?") != std::string::npos);
        return "First, add.\n\nThe total is $\\boxed{2}$.";
      });
  Gateway gw(maple::test::fast_gateway_options(cache.path()), provider);

  GeneratedSolution g = generate(make_problem(), gw, maple::test::test_model(), "Solve: {question}");
  CHECK(g.steps.size() == 2);
  CHECK(g.extracted_final_answer == "2");

  CHECK_THROWS_AS(generate(make_problem(), gw, maple::test::test_model(), "no placeholder"),
                  Error);
}

TEST_CASE("reflection parsing accepts bullets and the NONE form", "[stage1]") {
  auto points = parse_reflection("p", "- step 2: slipped a digit\n* missed the second case\n");
  REQUIRE(points);
  REQUIRE(points->size() == 2);
  CHECK((*points)[0].description == "step 2: slipped a digit");
  CHECK((*points)[0].source_step_index == 2);
  CHECK_FALSE((*points)[1].source_step_index);

  auto numbered = parse_reflection("p", "1. first issue\n2) second issue");
  REQUIRE(numbered);
  CHECK(numbered->size() == 2);

  WarningCapture warnings;
  auto none = parse_reflection("p", "NONE");
  REQUIRE(none);
  CHECK(none->empty());
  CHECK(warnings.contains("no misalignment points"));

  CHECK_FALSE(parse_reflection("p", "I think the overall approach was fine though."));
}

TEST_CASE("self-reflection re-prompts once on malformed output", "[stage1]") {
  TempDir cache("reflect");
  int calls = 0;
  auto provider = std::make_shared<FakeChatProvider>(
      [&](const ModelConfig&, const std::vector<ChatTurn>& turns) -> std::string {
        ++calls;
        if (calls == 1) {
          CHECK(turns.size() == 3);
          return "Well, the reasoning drifted somewhere in the middle.";
        }
        CHECK(turns.size() == 5);  // reply + format reminder appended
        return "- step 1: misread the problem";
      });
  Gateway gw(maple::test::fast_gateway_options(cache.path()), provider);

  Problem p = make_problem();
  GeneratedSolution bad = make_solution(p.id, "m", "thus $\\boxed{3}$");
  ReflectionTemplates templates;
  templates.self_check = "The right answer is {reference_final_answer}. Check your work on {question}";
  templates.reflection = "List misalignments against {reference_solution} as \"- \" bullets.";

  auto points = self_reflect(p, bad, gw, maple::test::test_model(), templates);
  REQUIRE(points.size() == 1);
  CHECK(points[0].source_step_index == 1);
  CHECK(calls == 2);
}

TEST_CASE("self-reflection gives up after the second malformed reply", "[stage1]") {
  TempDir cache("reflect2");
  auto provider = std::make_shared<FakeChatProvider>("prose, not bullets");
  Gateway gw(maple::test::fast_gateway_options(cache.path()), provider);

  Problem p = make_problem();
  GeneratedSolution bad = make_solution(p.id, "m", "thus $\\boxed{3}$");
  ReflectionTemplates templates;
  templates.self_check = "Answer: {reference_final_answer}";
  templates.reflection = "Bullets please.";

  try {
    self_reflect(p, bad, gw, maple::test::test_model(), templates);
    FAIL("expected a reflection-parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ReflectionParse);
    CHECK(e.exit_code() == 3);
  }
}

TEST_CASE("generated solutions round-trip through JSON", "[stage1]") {
  GeneratedSolution g =
      make_solution("p9", "m1", "Step 1: think.\n\nStep 2: the answer is $\\boxed{8}$.");
  nlohmann::json j = g;
  GeneratedSolution back = j.get<GeneratedSolution>();
  CHECK(back.problem_id == g.problem_id);
  CHECK(back.model_id == g.model_id);
  CHECK(back.raw_text == g.raw_text);
  CHECK(back.steps == g.steps);
  CHECK(back.extracted_final_answer == g.extracted_final_answer);
  CHECK(back.degenerate_incoherent == g.degenerate_incoherent);

  MisalignmentPoint mp;
  mp.problem_id = "p9";
  mp.description = "step 2: dropped a sign";
  mp.source_step_index = 2;
  nlohmann::json mj = mp;
  MisalignmentPoint mback = mj.get<MisalignmentPoint>();
  CHECK(mback.description == mp.description);
  CHECK(mback.source_step_index == mp.source_step_index);
}
