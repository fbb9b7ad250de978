#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>

#include "einfuzz/errors.hpp"
#include "einfuzz/generator.hpp"
#include "einfuzz/ir.hpp"
#include "einfuzz/json_io.hpp"
#include "einfuzz/rng.hpp"

#include "test_util.hpp"

using namespace einfuzz;

TEST_CASE("gemm kernel validates") {
  EinsumKernel k;
  k.output = {"A", {IndexVar('i'), IndexVar('j')}, StorageFormat::Dense};
  k.inputs = {{"B", {IndexVar('i'), IndexVar('k')}, StorageFormat::Dense},
              {"C", {IndexVar('k'), IndexVar('j')}, StorageFormat::Dense}};
  k.dims = {{IndexVar('i'), 2}, {IndexVar('j'), 3}, {IndexVar('k'), 4}};
  const ValidationReport report = validate(k);
  CHECK(report.ok);
  CHECK(report.violations.empty());
}

TEST_CASE("output index must come from the inputs") {
  EinsumKernel k = parse("A(m) = B(i,j) * C(j)");
  for (IndexVar v : k.used_indices()) k.dims[v] = 2;
  const ValidationReport report = validate(k);
  CHECK_FALSE(report.ok);
  // i is also under-connected, so the report carries two violations
  CHECK(std::find(report.violations.begin(), report.violations.end(),
                  "output index m not in inputs") != report.violations.end());
}

TEST_CASE("contraction index must bridge two inputs") {
  EinsumKernel k = parse("A(j) = B(i,j) * C(k)");
  for (IndexVar v : k.used_indices()) k.dims[v] = 2;
  const ValidationReport report = validate(k);
  CHECK_FALSE(report.ok);
  // i and k are both under-connected; k is the spec's example
  CHECK(std::find(report.violations.begin(), report.violations.end(),
                  "contraction index k appears in fewer than two inputs") !=
        report.violations.end());
}

TEST_CASE("single-input kernels are pure reductions") {
  EinsumKernel k = parse("A() = B(i,j)");
  for (IndexVar v : k.used_indices()) k.dims[v] = 2;
  CHECK(validate(k).ok);
}

TEST_CASE("diagonal access is rejected") {
  EinsumKernel k = parse("A(i) = B(i,i) * C(i)");
  for (IndexVar v : k.used_indices()) k.dims[v] = 2;
  const ValidationReport report = validate(k);
  CHECK_FALSE(report.ok);
  CHECK_EQ(report.violations[0], "index i repeated within term B");
}

TEST_CASE("csr only fits rank-2 terms") {
  EinsumKernel k = parse("A(j) = B(i,j) * C(i)");
  for (IndexVar v : k.used_indices()) k.dims[v] = 3;
  k.inputs[1].format = StorageFormat::Csr;  // C(i) is rank 1
  const ValidationReport report = validate(k);
  CHECK_FALSE(report.ok);
  CHECK_EQ(report.violations[0], "format csr not applicable to rank 1 term C");
}

TEST_CASE("dims must cover the used indices exactly") {
  EinsumKernel k = parse("A(j) = B(i,j) * C(i)");
  k.dims = {{IndexVar('i'), 3}, {IndexVar('z'), 2}};
  const ValidationReport report = validate(k);
  CHECK_FALSE(report.ok);
  CHECK(std::find(report.violations.begin(), report.violations.end(),
                  "missing dimension for index j") != report.violations.end());
  CHECK(std::find(report.violations.begin(), report.violations.end(),
                  "dimension entry for unused index z") != report.violations.end());
}

TEST_CASE("duplicate tensor names are rejected") {
  EinsumKernel k = parse("A(i) = B(i,j) * B(j,i)");
  for (IndexVar v : k.used_indices()) k.dims[v] = 2;
  const ValidationReport report = validate(k);
  CHECK_FALSE(report.ok);
  CHECK_EQ(report.violations[0], "duplicate tensor name 'B'");
}

TEST_CASE("validate never throws and is deterministic") {
  EinsumKernel k = parse("A(m) = B(i,i) * C(k)");
  const ValidationReport first = validate(k);
  const ValidationReport second = validate(k);
  CHECK_FALSE(first.ok);
  CHECK_EQ(first.violations, second.violations);
}

TEST_CASE("parse handles the worked kernel") {
  const EinsumKernel k = parse("A(j) = B(i,j) * C(i)");
  CHECK_EQ(k.output.name, "A");
  REQUIRE_EQ(k.output.indices.size(), 1);
  CHECK_EQ(k.output.indices[0].label(), 'j');
  REQUIRE_EQ(k.inputs.size(), 2);
  CHECK_EQ(k.inputs[0].name, "B");
  CHECK_EQ(k.inputs[0].indices.size(), 2);
  CHECK_EQ(k.inputs[1].name, "C");
  CHECK_EQ(k.inputs[0].format, StorageFormat::Dense);  // parse defaults
}

TEST_CASE("parse handles scalar outputs and whitespace") {
  const EinsumKernel k = parse("  A ( )=B( i )  ");
  CHECK_EQ(k.output.indices.size(), 0);
  REQUIRE_EQ(k.inputs.size(), 1);
  CHECK_EQ(k.inputs[0].indices.size(), 1);
}

TEST_CASE("parse reports the byte offset of the offence") {
  try {
    parse("A(j = B(i,j)");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK_EQ(e.offset(), 4);  // the '=' where ')' or ',' was required
  }
  CHECK_THROWS_AS(parse("A(j) = B(i,j) *"), ParseError);
  CHECK_THROWS_AS(parse("a(j) = B(j)"), ParseError);
  CHECK_THROWS_AS(parse("A(j) = B(j) extra"), ParseError);
  CHECK_THROWS_AS(parse(""), ParseError);
}

TEST_CASE("render matches the notation") {
  EinsumKernel gemm;
  gemm.output = {"A", {IndexVar('i'), IndexVar('j')}, StorageFormat::Dense};
  gemm.inputs = {{"B", {IndexVar('i'), IndexVar('k')}, StorageFormat::Dense},
                 {"C", {IndexVar('k'), IndexVar('j')}, StorageFormat::Dense}};
  CHECK_EQ(render(gemm), "A(i,j) = B(i,k) * C(k,j)");

  const EinsumKernel scalar = parse("A() = B(i)");
  CHECK_EQ(render(scalar), "A() = B(i)");

  CHECK_EQ(render(test::worked_kernel()), "A(j) = B(i,j) * C(i)");
}

TEST_CASE("parse inverts render on generated kernels") {
  GenConfig cfg;
  for (std::uint64_t i = 0; i < 2000; ++i) {
    Rng rng(derive_seed(99, i));
    const EinsumKernel k = generate_kernel(cfg, rng);
    EinsumKernel round = parse(render(k));
    // text carries structure only; restore the rest before comparing
    round.dims = k.dims;
    round.dtype = k.dtype;
    round.output.format = k.output.format;
    for (std::size_t t = 0; t < round.inputs.size(); ++t) {
      round.inputs[t].format = k.inputs[t].format;
    }
    REQUIRE_EQ(round, k);
  }
}

TEST_CASE("json round-trip preserves formats, dims, dtype and data") {
  GenConfig cfg;
  cfg.dtype = Dtype::Float;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    Rng rng(derive_seed(7, i));
    const EinsumKernel k = generate_kernel(cfg, rng);
    const auto inputs = generate_inputs(k, cfg, rng);
    const nlohmann::json doc = kernel_to_json(k, inputs);
    const KernelBundle back = kernel_from_json(doc);
    REQUIRE_EQ(back.kernel, k);
    REQUIRE(back.inputs == inputs);
    // and the document itself is stable through a reparse
    REQUIRE_EQ(nlohmann::json::parse(doc.dump()), doc);
  }
}

TEST_CASE("worked kernel document round-trips") {
  const nlohmann::json doc =
      kernel_to_json(test::worked_kernel(), test::worked_inputs());
  const KernelBundle back = kernel_from_json(doc);
  CHECK_EQ(back.kernel, test::worked_kernel());
  CHECK(back.inputs == test::worked_inputs());
  CHECK_EQ(doc["tensors"]["B"]["coords"],
           nlohmann::json::parse("[[0,1],[1,0],[1,1],[2,0]]"));
  CHECK_EQ(doc["tensors"]["B"]["values"], nlohmann::json::parse("[4,2,8,1]"));
}

TEST_CASE("schema errors name the offending field") {
  nlohmann::json doc = kernel_to_json(test::worked_kernel(), test::worked_inputs());

  SUBCASE("empty inputs") {
    doc["kernel"]["inputs"] = nlohmann::json::array();
    CHECK_THROWS_WITH_AS(kernel_from_json(doc), "inputs must be non-empty",
                         SchemaError);
  }
  SUBCASE("missing dtype") {
    doc.erase("dtype");
    CHECK_THROWS_WITH_AS(kernel_from_json(doc), "missing field 'dtype'",
                         SchemaError);
  }
  SUBCASE("ill-typed dims entry") {
    doc["dims"]["i"] = "three";
    CHECK_THROWS_AS(kernel_from_json(doc), SchemaError);
  }
  SUBCASE("missing tensor data") {
    doc["tensors"].erase("C");
    CHECK_THROWS_WITH_AS(kernel_from_json(doc), "missing tensor data for 'C'",
                         SchemaError);
  }
  SUBCASE("unknown version") {
    doc["version"] = 2;
    CHECK_THROWS_AS(kernel_from_json(doc), SchemaError);
  }
  SUBCASE("unsorted coords") {
    doc["tensors"]["B"]["coords"] = nlohmann::json::parse("[[1,0],[0,1],[1,1],[2,0]]");
    CHECK_THROWS_AS(kernel_from_json(doc), SchemaError);
  }
  SUBCASE("float values under int dtype") {
    doc["tensors"]["C"]["values"] = nlohmann::json::parse("[2.5,5]");
    CHECK_THROWS_AS(kernel_from_json(doc), SchemaError);
  }
}

TEST_CASE("out-of-range coordinates are a shape mismatch") {
  nlohmann::json doc = kernel_to_json(test::worked_kernel(), test::worked_inputs());
  doc["tensors"]["B"]["coords"] = nlohmann::json::parse("[[0,1],[1,0],[1,1],[3,0]]");
  CHECK_THROWS_AS(kernel_from_json(doc), ShapeMismatchError);
}

TEST_CASE("index variables reject anything but lowercase letters") {
  CHECK_THROWS_AS(IndexVar('A'), std::invalid_argument);
  CHECK_THROWS_AS(IndexVar('0'), std::invalid_argument);
  CHECK_EQ(IndexVar('z').label(), 'z');
}

TEST_CASE("format applicability") {
  CHECK(format_applicable(StorageFormat::Dense, 0));
  CHECK_FALSE(format_applicable(StorageFormat::Coo, 0));
  CHECK(format_applicable(StorageFormat::Coo, 3));
  CHECK(format_applicable(StorageFormat::Csr, 2));
  CHECK_FALSE(format_applicable(StorageFormat::Csr, 3));
  CHECK_FALSE(format_applicable(StorageFormat::Csc, 1));
  CHECK_EQ(applicable_formats(2).size(), 4);
  CHECK_EQ(applicable_formats(1).size(), 2);
  CHECK_EQ(applicable_formats(0).size(), 1);
}
