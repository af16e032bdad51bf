// Rebuilds the committed test fixtures: a small synthetic problem corpus in
// MATH's on-disk format plus a recorded response cache produced by scripted,
// fully deterministic providers. Run from the repository root:
//
//   ./build/tools/make_fixtures
//
// The tool drives the real pipeline (ingest through report) in record mode,
// so every cache key matches what a replay of the same config will ask for.

#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <maple/maple.hpp>

namespace fs = std::filesystem;
using namespace maple;

namespace {

struct ModelScript {
  std::string completion;
  bool correct = false;
  std::string reflection;   // reply to the reflection exchange (wrong cases)
  std::string judge;        // judge reply (wrong cases with steps)
  std::string judge_first;  // non-empty: malformed first judge reply, answer on re-prompt
};

struct FixtureCase {
  std::string dir;    // directory under the corpus root
  std::string file;   // file name without extension
  std::string type;   // MATH "type" field
  int level = 1;
  std::string question;
  std::string solution;  // reference solution, contains the boxed answer
  std::string answer;    // ground truth (last boxed expression of `solution`)
  ModelScript a, b;

  std::string id() const { return dir + "/" + file; }
};

std::string correct_completion(const std::string& restate, const std::string& work,
                               const std::string& boxed) {
  return "We are asked the following: " + restate + "\n\n" + work +
         "\n\nTherefore the final answer is $\\boxed{" + boxed + "}$.";
}

// Wrong-solution bodies, one texture per error pattern. Step 3 deliberately
// reuses the phrase "the final answer is" so the heuristic scorer sees a
// little redundancy and scores stay off the tanh ceiling.
std::string wrong_completion(int pattern, const std::string& boxed_wrong) {
  switch (pattern) {
    case 5: {  // incoherent repetition, no final answer
      std::string junk;
      for (int i = 0; i < 40; ++i) junk += "so the answer must be ";
      junk += "so";
      return junk;
    }
    case 6:
      return " ";  // effectively empty: records as a no-solution attempt
    case 2:
      return "The statement asks for two quantities, but the important one is the first, so I "
             "will find only that.\n\n"
             "Working the first part through gives a value, and the final answer is taken from "
             "it directly.\n\n"
             "So the final answer is $\\boxed{" + boxed_wrong + "}$.";
    case 3:
      return "We are asked to maximize the quantity, so I set up the problem as an optimization "
             "task.\n\n"
             "Differentiating and equating to zero, the arithmetic gives a candidate value for "
             "the final answer.\n\n"
             "So the final answer is $\\boxed{" + boxed_wrong + "}$.";
    case 4:
      return "This looks like a case for the quadratic formula, so I write the data as a "
             "quadratic equation.\n\n"
             "Applying the quadratic formula to these coefficients produces one admissible "
             "root, which I take as the final answer.\n\n"
             "So the final answer is $\\boxed{" + boxed_wrong + "}$.";
    case 1:
      return "The right relation for this problem is the standard one, and I substitute the "
             "given values into it.\n\n"
             "I substitute the values in the wrong order and then combine them, which gives "
             "the final answer after simplifying.\n\n"
             "So the final answer is $\\boxed{" + boxed_wrong + "}$.";
    case 7:
      return "I start by listing the given quantities and what the problem asks for.\n\n"
             "Combining the listed quantities gives a total, and that total is the final "
             "answer, though one digit slipped on the way.\n\n"
             "So the final answer is $\\boxed{" + boxed_wrong + "}$.";
    case 8:
      return "To begin, I note the values provided and the quantity requested.\n\n"
             "Working from the noted values, I compute the requested quantity and take it as "
             "the final answer.\n\n"
             "So the final answer is $\\boxed{" + boxed_wrong + "}$.";
    default:  // pattern 0: a single arithmetic slip
      return "First I restate the given data and identify the quantity the problem wants.\n\n"
             "Carrying out the computation, I combine the two intermediate values, and the "
             "final answer is their total.\n\n"
             "So the final answer is $\\boxed{" + boxed_wrong + "}$.";
  }
}

std::string reflection_for(int pattern) {
  switch (pattern) {
    case 0:
      return "- step 2: I combined the intermediate values incorrectly; a plain arithmetic slip "
             "produced the wrong total.";
    case 1:
      return "- step 2: I substituted the given values into the formula in the wrong order.\n"
             "- step 2: the arithmetic after the substitution was also wrong.";
    case 2:
      return "- step 1: I answered only part of what was asked and dropped the second condition.";
    case 3:
      return "- step 1: I misread the problem entirely and solved a different task.\n"
             "- step 2: every computation after the misreading was aimed at the wrong goal.";
    case 4:
      return "- step 1: the technique I picked does not apply to this problem at all.\n"
             "- step 2: continuing with that technique could never reach the requested value.";
    case 5:
      return "- the output collapsed into repeated fragments and never engaged with the problem.";
    case 6:
      return "- no solution was produced at all.";
    case 7:
      return "- step 2: a small arithmetic slip flipped a digit in the total.";
    default:
      return "NONE";  // pattern 8: the model sees nothing wrong with its reasoning
  }
}

std::string judge_for(int pattern) {
  switch (pattern) {
    case 0:
      return "step 1: NONE\nstep 2: Calculation Error\nstep 3: NONE";
    case 1:
      return "step 1: NONE\nstep 2: Incorrectly Applied Method, Calculation Error\nstep 3: NONE";
    case 2:
      return "step 1: Partial Misunderstanding\nstep 2: NONE\nstep 3: NONE";
    case 3:
      // alias forms on purpose: the parser must fold them into the taxonomy
      return "step 1: Complete Misunderstanding\nstep 2: arithmetic error\nstep 3: NONE";
    case 4:
      return "step 1: Incorrect Method\nstep 2: Incorrect Method\nstep 3: NONE";
    case 5:
      return "step 1: Incoherent Output";
    case 7:
      return "step 1: NONE\nstep 2: Calculation Error\nstep 3: NONE";
    default:  // pattern 8
      return "step 1: NONE\nstep 2: Calculation Error\nstep 3: Incorrectly Applied Method";
  }
}

constexpr const char* kMalformedJudgeReply =
    "Looking at the work as a whole, the reasoning seems mostly sound apart from a slip "
    "somewhere in the middle, though it is hard to pin down exactly.";

int binom2(int n) { return n * (n - 1) / 2; }

std::vector<FixtureCase> build_cases() {
  struct TopicSeed {
    const char* dir;
    const char* type;
  };
  const TopicSeed topics[7] = {
      {"intermediate_algebra", "Intermediate Algebra"},
      {"precalculus", "Precalculus"},
      {"algebra", "Algebra"},
      {"prealgebra", "Prealgebra"},
      {"geometry", "Geometry"},
      {"counting_and_probability", "Counting & Probability"},
      {"number_theory", "Number Theory"},
  };

  std::vector<FixtureCase> cases;
  int wrong_counter = 0;

  for (int i = 0; i < 32; ++i) {
    const TopicSeed& topic = topics[i % 7];
    FixtureCase c;
    c.dir = topic.dir;
    c.type = topic.type;
    c.level = (i % 5) + 1;
    char name[16];
    std::snprintf(name, sizeof(name), "%04d", i + 1);
    c.file = name;

    std::string restate, work, wrong;
    switch (i % 7) {
      case 0: {  // sum of roots of a monic quadratic
        int s = i + 7, p = i + 3;
        c.question = "What is the sum of the roots of $x^2 - " + std::to_string(s) + "x + " +
                     std::to_string(p) + " = 0$?";
        c.answer = std::to_string(s);
        if (i == 7) {
          // two boxed expressions on purpose: the final answer is the last one
          c.solution = "By Vieta's formulas the product of the roots is $\\boxed{" +
                       std::to_string(p) + "}$ and their sum equals the negated linear "
                       "coefficient, so the requested value is $\\boxed{" + c.answer + "}$.";
        } else {
          c.solution = "By Vieta's formulas the sum of the roots of a monic quadratic equals "
                       "the negated linear coefficient, so the sum is $\\boxed{" + c.answer +
                       "}$.";
        }
        restate = "the sum of the roots of the quadratic.";
        work = "By Vieta's formulas the sum of the roots is the negated coefficient of $x$, "
               "which is " + c.answer + ".";
        wrong = std::to_string(s + 2);
        break;
      }
      case 1: {  // complement of an angle; ground truth carries a degree mark
        int k = 20 + i;
        int comp = 90 - k;
        c.question = "An angle measures $" + std::to_string(k) +
                     "^\\circ$. How many degrees are in its complement?";
        c.answer = std::to_string(comp) + "^\\circ";
        c.solution = "Complementary angles sum to $90^\\circ$, so the complement measures "
                     "$90 - " + std::to_string(k) + " = \\boxed{" + c.answer + "}$.";
        restate = "the complement of a " + std::to_string(k) + " degree angle.";
        work = "Complementary angles add to 90 degrees, so the complement is 90 minus " +
               std::to_string(k) + ", which is " + std::to_string(comp) + " degrees.";
        wrong = std::to_string(comp + 5) + "^\\circ";
        break;
      }
      case 2: {  // linear equation
        int slope = 2 + (i % 3), root = (i % 9) + 2, b = i + 1;
        int rhs = slope * root + b;
        c.question = "Solve for $x$: $" + std::to_string(slope) + "x + " + std::to_string(b) +
                     " = " + std::to_string(rhs) + "$.";
        c.answer = std::to_string(root);
        c.solution = "Subtracting " + std::to_string(b) + " from both sides gives $" +
                     std::to_string(slope) + "x = " + std::to_string(rhs - b) +
                     "$, and dividing by " + std::to_string(slope) + " yields $x = \\boxed{" +
                     c.answer + "}$.";
        restate = "the value of x satisfying the linear equation.";
        work = "Moving the constant across and dividing by " + std::to_string(slope) +
               " isolates x, giving " + c.answer + ".";
        wrong = std::to_string(root + 2);
        break;
      }
      case 3: {  // plain addition; one case uses a currency answer
        if (i == 10) {
          c.question = "A museum ticket costs $\\$12$ per person. How much do tickets for "
                       "three people cost?";
          c.answer = "\\$36";
          c.solution = "Three tickets cost $3 \\times \\$12 = \\boxed{\\$36}$.";
          restate = "the cost of three tickets at 12 dollars each.";
          work = "Three times twelve dollars is thirty-six dollars.";
          wrong = "\\$42";
        } else {
          int a1 = 14 + 3 * i, b1 = 9 + 2 * i;
          c.question = "What is $" + std::to_string(a1) + " + " + std::to_string(b1) + "$?";
          c.answer = std::to_string(a1 + b1);
          c.solution = "Adding directly, $" + std::to_string(a1) + " + " + std::to_string(b1) +
                       " = \\boxed{" + c.answer + "}$.";
          restate = "the sum of the two given integers.";
          work = "Adding the tens and then the units gives " + c.answer + ".";
          wrong = std::to_string(a1 + b1 + 2);
        }
        break;
      }
      case 4: {  // rectangle area; one case makes the truth use a thousands comma
        int l = (i == 4) ? 40 : i + 5;
        int w = (i == 4) ? 25 : i + 2;
        int area = l * w;
        c.question = "A rectangle measures $" + std::to_string(l) + "$ by $" +
                     std::to_string(w) + "$. What is its area?";
        c.answer = (i == 4) ? "1,000" : std::to_string(area);
        c.solution = "The area of a rectangle is length times width: $" + std::to_string(l) +
                     " \\times " + std::to_string(w) + " = \\boxed{" + c.answer + "}$.";
        restate = "the area of the rectangle.";
        work = "Multiplying the side lengths, " + std::to_string(l) + " times " +
               std::to_string(w) + " equals " + std::to_string(area) + ".";
        wrong = (i == 4) ? "1,100" : std::to_string(area + 2);
        break;
      }
      case 5: {  // counting / probability; two cases carry fraction answers
        if (i == 5) {
          c.question = "A fair coin is flipped twice. What is the probability that both flips "
                       "land heads?";
          c.answer = "\\frac{1}{4}";
          c.solution = "The flips are independent, so the probability is $\\frac{1}{2} \\cdot "
                       "\\frac{1}{2} = \\boxed{\\frac{1}{4}}$.";
          restate = "the probability of two heads in two flips.";
          work = "Each flip is heads with probability one half, and the flips are independent, "
                 "so the probability is one quarter.";
          wrong = "\\frac{1}{2}";
        } else if (i == 26) {
          c.question = "A fair six-sided die is rolled once. What is the probability of rolling "
                       "a number greater than $2$?";
          c.answer = "\\frac{2}{3}";
          c.solution = "Four of the six faces exceed $2$, so the probability is $\\frac{4}{6} = "
                       "\\boxed{\\frac{2}{3}}$.";
          restate = "the probability of rolling more than two.";
          work = "Four outcomes out of six are favorable, and the fraction reduces to two "
                 "thirds.";
          wrong = "\\frac{1}{3}";
        } else {
          int n = i + 4;
          c.question = "How many ways are there to choose $2$ of $" + std::to_string(n) +
                       "$ distinct books?";
          c.answer = std::to_string(binom2(n));
          c.solution = "Order does not matter, so the count is $\\binom{" + std::to_string(n) +
                       "}{2} = \\boxed{" + c.answer + "}$.";
          restate = "the number of two-book selections.";
          work = "The number of unordered pairs is n times n minus one over two, which "
                 "evaluates to " + c.answer + ".";
          wrong = std::to_string(binom2(n) + 2);
        }
        break;
      }
      default: {  // remainders
        int n = 100 + 13 * i;
        c.question = "What is the remainder when $" + std::to_string(n) +
                     "$ is divided by $7$?";
        c.answer = std::to_string(n % 7);
        c.solution = "Dividing, $" + std::to_string(n) + " = 7 \\cdot " + std::to_string(n / 7) +
                     " + " + c.answer + "$, so the remainder is $\\boxed{" + c.answer + "}$.";
        restate = "the remainder of the division by seven.";
        work = "Taking out the largest multiple of seven leaves " + c.answer + ".";
        wrong = std::to_string((n % 7) + 2);
        break;
      }
    }

    // Answer-format variety on the correct side: some correct completions box
    // an equivalent-but-not-identical form so every match tier appears in the
    // fixture run.
    std::string a_boxed = c.answer;
    std::string b_boxed = c.answer;
    if (i == 5) b_boxed = "0.25";            // numeric tier
    if (i == 26) a_boxed = "\\dfrac{2}{3}";  // normalized tier
    if (i == 10) a_boxed = "36";             // currency stripped
    if (i == 4) a_boxed = "1000";            // thousands separators stripped
    if (i == 22) a_boxed = "48";             // bare number vs degree-marked truth

    auto fill = [&](ModelScript& script, bool wrong_case, const std::string& boxed) {
      if (!wrong_case) {
        script.correct = true;
        script.completion = correct_completion(restate, work, boxed);
        return;
      }
      int pattern = wrong_counter++ % 9;
      script.correct = false;
      script.completion = wrong_completion(pattern, wrong);
      script.reflection = reflection_for(pattern);
      if (pattern != 6) script.judge = judge_for(pattern);
      if (pattern == 7) script.judge_first = kMalformedJudgeReply;
    };
    fill(c.a, i % 3 == 0, a_boxed);
    fill(c.b, i % 2 == 0, b_boxed);
    cases.push_back(std::move(c));
  }
  return cases;
}

// Chat provider that answers from the fixture scripts. The case is located by
// finding its question text inside the first turn; the call kind is inferred
// from the model id and turn count.
class ScriptedChatProvider final : public ChatProvider {
 public:
  explicit ScriptedChatProvider(const std::vector<FixtureCase>& cases) : cases_(cases) {}

  std::string chat(const ModelConfig& config, const std::vector<ChatTurn>& turns) override {
    const FixtureCase& c = find_case(turns);
    if (config.model_id == "demo-judge") {
      const ModelScript& script = script_for_judged_model(c, turns);
      if (turns.size() == 1 && !script.judge_first.empty()) return script.judge_first;
      return script.judge;
    }
    const ModelScript& script = config.model_id == "demo-solver-a" ? c.a : c.b;
    if (turns.size() == 1) return script.completion;
    return script.reflection;  // the three-turn reflection exchange
  }

 private:
  const FixtureCase& find_case(const std::vector<ChatTurn>& turns) const {
    for (const auto& c : cases_) {
      if (turns.front().content.find(c.question) != std::string::npos) return c;
    }
    throw Error(ErrorCode::Validation, "scripted provider got a prompt for no known fixture");
  }

  // The judge prompt embeds the generated steps; match them back to the model
  // whose completion they came from.
  const ModelScript& script_for_judged_model(const FixtureCase& c,
                                             const std::vector<ChatTurn>& turns) const {
    const std::string& prompt = turns.front().content;
    std::string a_head = trim(std::string(c.a.completion)).substr(0, 40);
    std::string b_head = trim(std::string(c.b.completion)).substr(0, 40);
    bool is_a = !c.a.correct && !a_head.empty() && prompt.find(a_head) != std::string::npos;
    bool is_b = !c.b.correct && !b_head.empty() && prompt.find(b_head) != std::string::npos;
    if (is_a == is_b)
      throw Error(ErrorCode::Validation,
                  "cannot attribute judge prompt for " + c.id() + " to a model");
    return is_a ? c.a : c.b;
  }

  const std::vector<FixtureCase>& cases_;
};

// Deterministic pseudo-embeddings: 16 dims seeded from a hash of the text.
class ScriptedEmbeddingProvider final : public EmbeddingProvider {
 public:
  std::vector<std::vector<double>> embed(const ModelConfig&,
                                         const std::vector<std::string>& texts) override {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
      std::uint64_t state = 1469598103934665603ull;
      for (unsigned char ch : text) {
        state ^= ch;
        state *= 1099511628211ull;
      }
      std::vector<double> v(16);
      for (double& x : v) {
        state += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        z ^= z >> 31;
        x = static_cast<double>(z % 2000000ull) / 1000000.0 - 1.0;
      }
      out.push_back(std::move(v));
    }
    return out;
  }
};

void write_corpus(const fs::path& root, const std::vector<FixtureCase>& cases) {
  fs::remove_all(root);
  for (const auto& c : cases) {
    fs::create_directories(root / c.dir);
    nlohmann::json j{{"problem", c.question},
                     {"level", "Level " + std::to_string(c.level)},
                     {"type", c.type},
                     {"solution", c.solution}};
    write_text_file(root / c.dir / (c.file + ".json"), j.dump(2) + "\n");
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::Validation, "fixture sanity check failed: " + what);
}

}  // namespace

int main() {
  try {
    std::vector<FixtureCase> cases = build_cases();

    PipelineConfig config = load_config("config/fixtures.json");
    write_corpus(config.dataset_root, cases);
    fs::remove_all(config.gateway.cache_dir);

    fs::path tmp_runs = fs::temp_directory_path() / "maple-fixture-build";
    fs::remove_all(tmp_runs);
    config.runs_dir = tmp_runs.string();

    PipelineContext ctx;
    ctx.config = config;
    ctx.offline = false;
    ctx.paths = RunPaths::create(config, "fixture-build");
    ctx.taxonomy = load_taxonomy_file(config.taxonomy_path);
    GatewayOptions gw = config.gateway;
    gw.mode = CacheMode::Record;
    ctx.gateway = std::make_shared<Gateway>(gw, std::make_shared<ScriptedChatProvider>(cases),
                                            std::make_shared<ScriptedEmbeddingProvider>());
    ctx.store = std::make_unique<RunStore>(ctx.paths.records().string(), "fixture-build");

    size_t ingested = run_ingest(ctx, {}, std::nullopt, 0, /*strict=*/true);
    require(ingested == cases.size(), "ingested " + std::to_string(ingested) + " problems");

    StageSummary gen = run_generate(ctx, {}, false);
    require(gen.processed == 2 * cases.size(), "generation count");

    StageSummary ver = run_verify(ctx, false);
    size_t expected_correct = 0;
    for (const auto& c : cases) expected_correct += (c.a.correct ? 1 : 0) + (c.b.correct ? 1 : 0);
    require(ver.correct == expected_correct,
            "verification found " + std::to_string(ver.correct) + " correct, scripted " +
                std::to_string(expected_correct));

    StageSummary refl = run_reflect(ctx, false);
    require(refl.processed == 2 * cases.size() - expected_correct, "reflection count");

    ClusterReport clusters = run_cluster(ctx);
    require(clusters.chosen_k >= 2, "cluster count");

    StageSummary judged = run_judge(ctx, false);
    require(judged.processed == refl.processed, "judgement count");

    StageSummary scored = run_score(ctx, false);
    require(scored.processed == judged.processed, "scoring count");

    run_report(ctx);

    GatewayStats stats = ctx.gateway->stats();
    std::printf("fixtures rebuilt: %zu problems, %llu provider calls recorded, cache at %s\n",
                cases.size(), static_cast<unsigned long long>(stats.provider_calls),
                config.gateway.cache_dir.string().c_str());
    std::printf("scratch run dir: %s (safe to delete)\n", tmp_runs.string().c_str());
    fs::remove_all(tmp_runs);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "make_fixtures failed: %s\n", e.what());
    return 1;
  }
  return 0;
}
