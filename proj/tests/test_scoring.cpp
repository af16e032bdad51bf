#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <maple/scoring.hpp>

#include "helpers.hpp"

using namespace maple;
using maple::test::TempDir;

namespace {

LabelFrequencies freqs(std::map<ErrorLabel, int> counts) {
  LabelFrequencies f;
  f.counts = std::move(counts);
  return f;
}

}  // namespace

TEST_CASE("label frequencies count per step, scope labels at most once", "[scoring]") {
  StepLabels s;
  s.problem_id = "p";
  s.per_step = {{ErrorLabel::CalculationError},
                {ErrorLabel::CalculationError, ErrorLabel::IncorrectlyAppliedMethod},
                {ErrorLabel::CalculationError, ErrorLabel::CalculationError,
                 ErrorLabel::IncoherentOutput}};
  s.solution_scope = {ErrorLabel::IncoherentOutput};

  LabelFrequencies f = label_frequencies(s);
  CHECK(f.at(ErrorLabel::CalculationError) == 3);  // once per step, step 3 not double-counted
  CHECK(f.at(ErrorLabel::IncorrectlyAppliedMethod) == 1);
  CHECK(f.at(ErrorLabel::IncoherentOutput) == 1);  // scope label stays at 1
  CHECK(f.at(ErrorLabel::NoSolution) == 0);

  // a scope label only present on steps still counts once
  StepLabels t;
  t.per_step = {{ErrorLabel::NoSolution}, {ErrorLabel::NoSolution}};
  CHECK(label_frequencies(t).at(ErrorLabel::NoSolution) == 1);
}

TEST_CASE("error rate matches the closed form", "[scoring]") {
  LabelWeights w = default_weights();  // sums to 4.75
  LabelFrequencies f = freqs({{ErrorLabel::CalculationError, 2},
                              {ErrorLabel::IncorrectlyAppliedMethod, 1}});

  double expected = (0.10 * std::log(3.0) + 0.40 * std::log(2.0)) / 4.75;
  CHECK(error_rate(f, w) == Catch::Approx(expected).epsilon(1e-14));

  ErrorRateOptions observed;
  observed.denominator = WeightDenominator::ObservedOnly;
  double expected_observed = (0.10 * std::log(3.0) + 0.40 * std::log(2.0)) / 0.50;
  CHECK(error_rate(f, w, observed) == Catch::Approx(expected_observed).epsilon(1e-14));

  ErrorRateOptions base2;
  base2.log_base = LogBase::Log2;
  double expected_base2 = (0.10 * std::log2(3.0) + 0.40 * std::log2(2.0)) / 4.75;
  CHECK(error_rate(f, w, base2) == Catch::Approx(expected_base2).epsilon(1e-14));

  CHECK(error_rate(freqs({}), w) == 0.0);
  ErrorRateOptions observed_empty;
  observed_empty.denominator = WeightDenominator::ObservedOnly;
  CHECK(error_rate(freqs({}), w, observed_empty) == 0.0);

  CHECK_THROWS_AS(error_rate(freqs({{ErrorLabel::CalculationError, -1}}), w), Error);
}

TEST_CASE("error rate is monotone in frequencies and scale-free in weights", "[scoring]") {
  LabelWeights w = default_weights();
  LabelFrequencies f = freqs({{ErrorLabel::CalculationError, 1}});
  LabelFrequencies g = freqs({{ErrorLabel::CalculationError, 2}});
  CHECK(error_rate(g, w) > error_rate(f, w));

  LabelWeights half = w;
  for (auto& [label, weight] : half.values) weight *= 0.5;
  CHECK(error_rate(f, half) == Catch::Approx(error_rate(f, w)).epsilon(1e-12));
}

TEST_CASE("maple score follows tanh(e*v / max(r, eps))", "[scoring]") {
  StepQuality q;
  q.validity = 0.8;
  q.redundancy = 0.2;
  MapleResult m = maple_score("p", 0.09217, q);
  CHECK(m.score == Catch::Approx(std::tanh(0.09217 * 0.8 / 0.2)).epsilon(1e-14));
  CHECK(m.e == 0.09217);
  CHECK(m.v == 0.8);
  CHECK(m.r == 0.2);

  CHECK(maple_score("p", 0.0, q).score == 0.0);

  StepQuality zero_r;
  zero_r.validity = 1.0;
  zero_r.redundancy = 0.0;
  CHECK(maple_score("p", 1.0, zero_r, 1e-3).score ==
        Catch::Approx(std::tanh(1.0 / 1e-3)).epsilon(1e-14));

  CHECK_THROWS_AS(maple_score("p", -0.1, q), Error);
  CHECK_THROWS_AS(maple_score("p", 1.0, q, 0.0), Error);
  StepQuality bad;
  bad.validity = 1.5;
  CHECK_THROWS_AS(maple_score("p", 1.0, bad), Error);
}

TEST_CASE("heuristic step scorer applies its rule table", "[scoring]") {
  HeuristicStepScorer scorer;
  std::vector<std::string> steps{
      "First we expand the left side carefully.",  // normal
      "   ",                                       // blank
      "So done",                                   // vacuous (< 3 tokens)
      "First we expand the left side carefully.",  // exact repeat
  };
  StepScores s = scorer.score_steps("q", steps);
  REQUIRE(s.validity.size() == 4);
  CHECK(s.validity[0] == 0.9);
  CHECK(s.validity[1] == 0.0);
  CHECK(s.validity[2] == 0.3);
  CHECK(s.validity[3] == 0.9);
  CHECK(s.redundancy[0] == 0.0);  // first step never redundant
  CHECK(s.redundancy[3] == 1.0);  // verbatim repeat

  // partial trigram overlap lands strictly between 0 and 1
  StepScores partial = scorer.score_steps(
      "q", {"the quick brown fox jumps over the lazy dog",
            "the quick brown fox walks under the lazy dog"});
  CHECK(partial.redundancy[1] > 0.0);
  CHECK(partial.redundancy[1] < 1.0);
}

TEST_CASE("caching step scorer records once and replays offline", "[scoring]") {
  TempDir dir("scorer-cache");
  auto inner = std::make_shared<HeuristicStepScorer>();
  CachingStepScorer recorder(inner, dir.str(), CacheMode::Record);

  std::vector<std::string> steps{"compute the product of both values", "take the remainder"};
  StepScores first = recorder.score_steps("q1", steps);
  StepScores second = recorder.score_steps("q1", steps);
  CHECK(first.validity == second.validity);

  CachingStepScorer replayer(nullptr, dir.str(), CacheMode::Replay, "heuristic-v1");
  StepScores replayed = replayer.score_steps("q1", steps);
  CHECK(replayed.validity == first.validity);
  CHECK(replayed.redundancy == first.redundancy);

  try {
    replayer.score_steps("q-unseen", steps);
    FAIL("expected a replay miss");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ReplayMiss);
  }

  CHECK_THROWS_AS(CachingStepScorer(nullptr, dir.str(), CacheMode::Record), Error);
  CHECK_THROWS_AS(CachingStepScorer(nullptr, dir.str(), CacheMode::Replay), Error);
}

TEST_CASE("step quality aggregates min validity and max redundancy by default", "[scoring]") {
  GeneratedSolution sol;
  sol.problem_id = "p";
  sol.steps = {"First we expand the left side carefully.", "So done",
               "First we expand the left side carefully."};
  HeuristicStepScorer scorer;
  StepQuality q = step_quality("q", sol, scorer);
  CHECK(q.validity == 0.3);    // min(0.9, 0.3, 0.9)
  CHECK(q.redundancy == 1.0);  // max(0, ..., 1)
  CHECK(q.per_step_validity.size() == 3);

  QualityAggregation mean_agg;
  mean_agg.validity = AggregationKind::Mean;
  mean_agg.redundancy = AggregationKind::Mean;
  StepQuality qm = step_quality("q", sol, scorer, mean_agg);
  CHECK(qm.validity == Catch::Approx((0.9 + 0.3 + 0.9) / 3.0));

  GeneratedSolution empty;
  empty.problem_id = "p";
  CHECK_THROWS_AS(step_quality("q", empty, scorer), Error);
}

TEST_CASE("a misbehaving scorer is a provider-contract error", "[scoring]") {
  struct ShortScorer final : StepScorer {
    std::string scorer_id() const override { return "short"; }
    StepScores score_steps(const std::string&, const std::vector<std::string>&) override {
      return {{0.5}, {0.5}};
    }
  };
  struct WildScorer final : StepScorer {
    std::string scorer_id() const override { return "wild"; }
    StepScores score_steps(const std::string&, const std::vector<std::string>& steps) override {
      return {std::vector<double>(steps.size(), 7.0), std::vector<double>(steps.size(), 0.0)};
    }
  };

  GeneratedSolution sol;
  sol.problem_id = "p";
  sol.steps = {"a b c", "d e f"};
  ShortScorer short_scorer;
  WildScorer wild_scorer;
  try {
    step_quality("q", sol, short_scorer);
    FAIL("expected a contract error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ProviderContract);
  }
  CHECK_THROWS_AS(step_quality("q", sol, wild_scorer), Error);
}

TEST_CASE("neutral quality drives the score by error rate alone", "[scoring]") {
  StepQuality q = neutral_quality();
  CHECK(q.validity == 1.0);
  CHECK(q.redundancy == 0.0);
  MapleResult m = maple_score("p", 0.5, q, 1e-3);
  CHECK(m.score == Catch::Approx(std::tanh(0.5 / 1e-3)).epsilon(1e-14));
  CHECK(m.score > 0.999);
}

TEST_CASE("maple results round-trip through JSON", "[scoring]") {
  StepQuality q;
  q.validity = 0.7;
  q.redundancy = 0.1;
  MapleResult m = maple_score("p3", 0.2, q);
  nlohmann::json j = m;
  MapleResult back = j.get<MapleResult>();
  CHECK(back.problem_id == "p3");
  CHECK(back.e == m.e);
  CHECK(back.score == m.score);
}
