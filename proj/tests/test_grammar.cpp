#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "einfuzz/grammar.hpp"
#include "einfuzz/rng.hpp"

using namespace einfuzz;

TEST_CASE("semantic_check rule order on hand-built samples") {
  CHECK_EQ(semantic_check("A(m) = B(i,j) * C(j)", {{2}, {3, 4}, {4}}),
           ValidityOutcome::OutputIndexViolation);
  CHECK_EQ(semantic_check("A(i) = B(i,j) * C(j)", {{3}, {3, 4}, {4}}),
           ValidityOutcome::Valid);
  CHECK_EQ(semantic_check("A(i) = B(i,j) * C(j)", {{3}, {3, 4}, {5}}),
           ValidityOutcome::DimensionInconsistency);
  CHECK_EQ(semantic_check("A(j) = B(i,j) * C(k)", {{3}, {2, 3}, {4}}),
           ValidityOutcome::ConnectivityViolation);
  CHECK_EQ(semantic_check("A(j = B(i,j)", {}), ValidityOutcome::ParseError);
  // diagonal access counts as an index-usage inconsistency
  CHECK_EQ(semantic_check("A(i) = B(i,i) * C(i)", {{2}, {2, 2}, {2}}),
           ValidityOutcome::DimensionInconsistency);
  // single-input reductions are fine
  CHECK_EQ(semantic_check("A() = B(i,j)", {{}, {2, 3}}), ValidityOutcome::Valid);
  // first broken rule wins: both output-index and shape problems present
  CHECK_EQ(semantic_check("A(m) = B(i,j) * C(j)", {{2}, {3, 4}, {9}}),
           ValidityOutcome::OutputIndexViolation);
}

TEST_CASE("cfg output is always syntactically valid") {
  CfgConfig cfg;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    Rng rng(derive_seed(21, i));
    const CfgSample sample = cfg_generate(cfg, rng);
    REQUIRE_NOTHROW(parse(sample.text));
    REQUIRE_EQ(sample.shapes.size(), 1 + parse(sample.text).inputs.size());
  }
}

TEST_CASE("cfg generation is deterministic") {
  CfgConfig cfg;
  Rng a(77);
  Rng b(77);
  const CfgSample sa = cfg_generate(cfg, a);
  const CfgSample sb = cfg_generate(cfg, b);
  CHECK_EQ(sa.text, sb.text);
  CHECK_EQ(sa.shapes, sb.shapes);
}

TEST_CASE("experiment counts partition the sample count") {
  CfgConfig cfg;
  cfg.seed = 9;
  const ValidityStats stats = run_validity_experiment(cfg, 20000);
  CHECK_EQ(stats.n, 20000);
  CHECK_EQ(stats.valid + stats.parse_error + stats.output_index +
               stats.connectivity + stats.dimension,
           stats.n);
  // the CFG wastes most of its budget on semantically invalid kernels
  CHECK_LT(stats.validity_rate(), 0.15);
  CHECK_GT(stats.validity_rate(), 0.0);
  CHECK_EQ(stats.parse_error, 0);  // syntax is the one thing a CFG gets right
}

TEST_CASE("experiment is deterministic per seed") {
  CfgConfig cfg;
  cfg.seed = 10;
  const ValidityStats a = run_validity_experiment(cfg, 5000);
  const ValidityStats b = run_validity_experiment(cfg, 5000);
  CHECK_EQ(a.to_json(), b.to_json());
}

TEST_CASE("constraint generator scores 100% through the same checker") {
  GenConfig gen;
  gen.seed = 11;
  const ValidityStats stats = run_constraint_validity_experiment(gen, 20000);
  CHECK_EQ(stats.n, 20000);
  CHECK_EQ(stats.valid, 20000);
  CHECK_EQ(stats.validity_rate(), 1.0);
}

TEST_CASE("empty experiments are rejected") {
  CHECK_THROWS_AS(run_validity_experiment(CfgConfig{}, 0), std::invalid_argument);
  CHECK_THROWS_AS(run_constraint_validity_experiment(GenConfig{}, 0),
                  std::invalid_argument);
}

TEST_CASE("stats json carries the documented keys") {
  CfgConfig cfg;
  const nlohmann::json doc = run_validity_experiment(cfg, 100).to_json();
  for (const char* key :
       {"n", "valid", "parse_error", "output_index", "connectivity", "dimension",
        "validity_rate"}) {
    CHECK(doc.contains(key));
  }
}

TEST_CASE("cfg config validation") {
  CfgConfig cfg;
  cfg.alphabet_size = 0;
  CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
  cfg = CfgConfig{};
  cfg.shape_min = 3;
  cfg.shape_max = 2;
  CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
}
