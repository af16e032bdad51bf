#include <catch2/catch_amalgamated.hpp>

#include <set>

#include <maple/taxonomy.hpp>

using namespace maple;

TEST_CASE("the label set is fixed and scoped", "[taxonomy]") {
  CHECK(kAllLabels.size() == 7);
  std::set<std::string> slugs, names;
  for (ErrorLabel l : kAllLabels) {
    slugs.insert(label_slug(l));
    names.insert(label_name(l));
    CHECK_FALSE(std::string(label_description(l)).empty());
  }
  CHECK(slugs.size() == 7);
  CHECK(names.size() == 7);

  CHECK(is_solution_scope(ErrorLabel::IncoherentOutput));
  CHECK(is_solution_scope(ErrorLabel::NoSolution));
  CHECK_FALSE(is_solution_scope(ErrorLabel::CalculationError));
  CHECK_FALSE(is_solution_scope(ErrorLabel::CompleteMisunderstanding));
}

TEST_CASE("label parsing folds names, slugs, and aliases", "[taxonomy]") {
  CHECK(parse_label("Calculation Error") == ErrorLabel::CalculationError);
  CHECK(parse_label("calculation_error") == ErrorLabel::CalculationError);
  CHECK(parse_label("CALCULATION-ERROR") == ErrorLabel::CalculationError);
  CHECK(parse_label("arithmetic error") == ErrorLabel::CalculationError);
  CHECK(parse_label("calculation mistake") == ErrorLabel::CalculationError);
  CHECK(parse_label("Incorrectly Applied Method") == ErrorLabel::IncorrectlyAppliedMethod);
  CHECK(parse_label("misapplied method") == ErrorLabel::IncorrectlyAppliedMethod);
  CHECK(parse_label("wrong method") == ErrorLabel::IncorrectMethod);
  CHECK(parse_label("Complete Misunderstanding") == ErrorLabel::CompleteMisunderstanding);
  CHECK(parse_label("partial misunderstanding") == ErrorLabel::PartialMisunderstanding);
  CHECK(parse_label("gibberish") == ErrorLabel::IncoherentOutput);
  CHECK(parse_label("no answer") == ErrorLabel::NoSolution);
  CHECK(parse_label("refusal") == ErrorLabel::NoSolution);
  CHECK_FALSE(parse_label("creative leap"));
  CHECK_FALSE(parse_label(""));
}

TEST_CASE("default weights carry the severity table and one assumed entry", "[taxonomy]") {
  LabelWeights w = default_weights();
  CHECK_NOTHROW(w.validate());
  CHECK(w.at(ErrorLabel::CompleteMisunderstanding) == 0.95);
  CHECK(w.at(ErrorLabel::PartialMisunderstanding) == 0.75);
  CHECK(w.at(ErrorLabel::IncorrectMethod) == 0.55);
  CHECK(w.at(ErrorLabel::IncorrectlyAppliedMethod) == 0.40);
  CHECK(w.at(ErrorLabel::CalculationError) == 0.10);
  CHECK(w.at(ErrorLabel::IncoherentOutput) == 1.00);
  CHECK(w.at(ErrorLabel::NoSolution) == 1.00);

  CHECK(w.is_assumed(ErrorLabel::IncorrectMethod));
  for (ErrorLabel l : kAllLabels)
    if (l != ErrorLabel::IncorrectMethod) CHECK_FALSE(w.is_assumed(l));
}

TEST_CASE("weight validation rejects gaps and out-of-range values", "[taxonomy]") {
  LabelWeights w = default_weights();
  w.values.erase(ErrorLabel::CalculationError);
  CHECK_THROWS_AS(w.validate(), Error);

  LabelWeights zero = default_weights();
  zero.values[ErrorLabel::CalculationError] = 0.0;
  CHECK_THROWS_AS(zero.validate(), Error);

  LabelWeights big = default_weights();
  big.values[ErrorLabel::CalculationError] = 1.5;
  CHECK_THROWS_AS(big.validate(), Error);

  LabelWeights negative = default_weights();
  negative.values[ErrorLabel::CalculationError] = -0.1;
  CHECK_THROWS_AS(negative.validate(), Error);
}

TEST_CASE("taxonomy JSON can override weights but not invent labels", "[taxonomy]") {
  Taxonomy t;
  t.weights = default_weights();
  nlohmann::json j = t;

  Taxonomy back = j.get<Taxonomy>();
  CHECK(back.weights.at(ErrorLabel::CalculationError) == 0.10);
  CHECK(back.weights.is_assumed(ErrorLabel::IncorrectMethod));

  nlohmann::json patched = j;
  for (auto& entry : patched.at("labels")) {
    if (entry.at("slug") == "calculation_error") {
      entry["weight"] = 0.2;
      entry["description"] = "a slip in the arithmetic itself";
    }
  }
  Taxonomy overridden = patched.get<Taxonomy>();
  CHECK(overridden.weights.at(ErrorLabel::CalculationError) == 0.2);

  nlohmann::json invented = j;
  invented.at("labels").push_back({{"name", "Cosmic Ray Interference"}, {"weight", 0.5}});
  CHECK_THROWS_AS(invented.get<Taxonomy>(), Error);
}

TEST_CASE("describe_labels lists every label with its description", "[taxonomy]") {
  Taxonomy t;
  t.weights = default_weights();
  std::string text = t.describe_labels();
  for (ErrorLabel l : kAllLabels) {
    CHECK(text.find(label_name(l)) != std::string::npos);
  }
}
