#include "einfuzz/ir.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <stdexcept>

#include "einfuzz/errors.hpp"

namespace einfuzz {

IndexVar::IndexVar(char label) : label_(label) {
  if (label < 'a' || label > 'z') {
    throw std::invalid_argument(std::string("index label must be a lowercase letter, got '") +
                                label + "'");
  }
}

std::string_view format_name(StorageFormat f) {
  switch (f) {
    case StorageFormat::Dense: return "dense";
    case StorageFormat::Coo: return "coo";
    case StorageFormat::Csr: return "csr";
    case StorageFormat::Csc: return "csc";
  }
  return "dense";
}

std::optional<StorageFormat> format_from_name(std::string_view name) {
  if (name == "dense") return StorageFormat::Dense;
  if (name == "coo") return StorageFormat::Coo;
  if (name == "csr") return StorageFormat::Csr;
  if (name == "csc") return StorageFormat::Csc;
  return std::nullopt;
}

bool format_applicable(StorageFormat f, std::size_t rank) {
  switch (f) {
    case StorageFormat::Dense: return true;
    case StorageFormat::Coo: return rank >= 1;
    case StorageFormat::Csr:
    case StorageFormat::Csc: return rank == 2;
  }
  return false;
}

std::vector<StorageFormat> applicable_formats(std::size_t rank) {
  std::vector<StorageFormat> out;
  for (StorageFormat f : {StorageFormat::Dense, StorageFormat::Coo,
                          StorageFormat::Csr, StorageFormat::Csc}) {
    if (format_applicable(f, rank)) out.push_back(f);
  }
  return out;
}

std::string_view dtype_name(Dtype d) {
  return d == Dtype::Int ? "int" : "float";
}

std::optional<Dtype> dtype_from_name(std::string_view name) {
  if (name == "int") return Dtype::Int;
  if (name == "float") return Dtype::Float;
  return std::nullopt;
}

bool TensorTerm::has_index(IndexVar v) const {
  return std::find(indices.begin(), indices.end(), v) != indices.end();
}

std::set<IndexVar> EinsumKernel::input_index_union() const {
  std::set<IndexVar> out;
  for (const TensorTerm& t : inputs) out.insert(t.indices.begin(), t.indices.end());
  return out;
}

std::set<IndexVar> EinsumKernel::used_indices() const {
  std::set<IndexVar> out = input_index_union();
  out.insert(output.indices.begin(), output.indices.end());
  return out;
}

std::set<IndexVar> EinsumKernel::contraction_indices() const {
  std::set<IndexVar> out;
  for (IndexVar v : input_index_union()) {
    if (!output.has_index(v)) out.insert(v);
  }
  return out;
}

std::size_t EinsumKernel::input_occurrences(IndexVar v) const {
  std::size_t n = 0;
  for (const TensorTerm& t : inputs) {
    if (t.has_index(v)) ++n;
  }
  return n;
}

std::vector<std::int64_t> EinsumKernel::term_shape(const TensorTerm& term) const {
  std::vector<std::int64_t> shape;
  shape.reserve(term.indices.size());
  for (IndexVar v : term.indices) shape.push_back(dims.at(v));
  return shape;
}

namespace {

bool valid_tensor_name(std::string_view name) {
  if (name.empty() || name[0] < 'A' || name[0] > 'Z') return false;
  for (std::size_t i = 1; i < name.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(name[i]))) return false;
  }
  return true;
}

void check_term(const TensorTerm& term, ValidationReport& report) {
  if (!valid_tensor_name(term.name)) {
    report.violations.push_back("bad tensor name '" + term.name + "'");
  }
  for (std::size_t i = 0; i < term.indices.size(); ++i) {
    for (std::size_t j = i + 1; j < term.indices.size(); ++j) {
      if (term.indices[i] == term.indices[j]) {
        report.violations.push_back(std::string("index ") + term.indices[i].label() +
                                    " repeated within term " + term.name);
      }
    }
  }
  if (!format_applicable(term.format, term.rank())) {
    std::ostringstream os;
    os << "format " << format_name(term.format) << " not applicable to rank "
       << term.rank() << " term " << term.name;
    report.violations.push_back(os.str());
  }
}

}  // namespace

ValidationReport validate(const EinsumKernel& kernel) {
  ValidationReport report;

  if (kernel.inputs.empty()) {
    report.violations.push_back("kernel has no input terms");
    report.ok = false;
    return report;
  }

  std::set<std::string> names{kernel.output.name};
  for (const TensorTerm& t : kernel.inputs) {
    if (!names.insert(t.name).second) {
      report.violations.push_back("duplicate tensor name '" + t.name + "'");
    }
  }

  check_term(kernel.output, report);
  for (const TensorTerm& t : kernel.inputs) check_term(t, report);

  const std::set<IndexVar> in_union = kernel.input_index_union();
  for (IndexVar v : kernel.output.indices) {
    if (!in_union.contains(v)) {
      report.violations.push_back(std::string("output index ") + v.label() +
                                  " not in inputs");
    }
  }

  // Single-input kernels are pure reductions; the bridging requirement only
  // makes sense once there are two operands to bridge.
  if (kernel.inputs.size() >= 2) {
    for (IndexVar v : kernel.contraction_indices()) {
      if (kernel.input_occurrences(v) < 2) {
        report.violations.push_back(std::string("contraction index ") + v.label() +
                                    " appears in fewer than two inputs");
      }
    }
  }

  const std::set<IndexVar> used = kernel.used_indices();
  for (IndexVar v : used) {
    auto it = kernel.dims.find(v);
    if (it == kernel.dims.end()) {
      report.violations.push_back(std::string("missing dimension for index ") + v.label());
    } else if (it->second <= 0) {
      report.violations.push_back(std::string("non-positive extent for index ") + v.label());
    }
  }
  for (const auto& [v, extent] : kernel.dims) {
    if (!used.contains(v)) {
      report.violations.push_back(std::string("dimension entry for unused index ") + v.label());
    }
  }

  report.ok = report.violations.empty();
  return report;
}

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  EinsumKernel run() {
    EinsumKernel kernel;
    kernel.output = term();
    skip_ws();
    expect('=');
    kernel.inputs.push_back(term());
    skip_ws();
    while (!at_end() && peek() == '*') {
      ++pos_;
      kernel.inputs.push_back(term());
      skip_ws();
    }
    if (!at_end()) {
      throw ParseError(pos_, std::string("unexpected character '") + peek() + "'");
    }
    return kernel;
  }

 private:
  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }

  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(peek()))) ++pos_;
  }

  void expect(char c) {
    if (at_end() || peek() != c) {
      throw ParseError(pos_, std::string("expected '") + c + "'");
    }
    ++pos_;
  }

  TensorTerm term() {
    skip_ws();
    TensorTerm t;
    if (at_end() || peek() < 'A' || peek() > 'Z') {
      throw ParseError(pos_, "expected tensor name");
    }
    t.name.push_back(peek());
    ++pos_;
    while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) {
      t.name.push_back(peek());
      ++pos_;
    }
    skip_ws();
    expect('(');
    skip_ws();
    if (!at_end() && peek() == ')') {
      ++pos_;
      return t;
    }
    for (;;) {
      skip_ws();
      if (at_end() || peek() < 'a' || peek() > 'z') {
        throw ParseError(pos_, "expected index letter");
      }
      t.indices.emplace_back(peek());
      ++pos_;
      skip_ws();
      if (!at_end() && peek() == ',') {
        ++pos_;
        continue;
      }
      expect(')');
      return t;
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

void render_term(std::ostringstream& os, const TensorTerm& t) {
  os << t.name << '(';
  for (std::size_t i = 0; i < t.indices.size(); ++i) {
    if (i > 0) os << ',';
    os << t.indices[i].label();
  }
  os << ')';
}

}  // namespace

EinsumKernel parse(std::string_view text) { return Parser(text).run(); }

std::string render(const EinsumKernel& kernel) {
  std::ostringstream os;
  render_term(os, kernel.output);
  os << " = ";
  for (std::size_t i = 0; i < kernel.inputs.size(); ++i) {
    if (i > 0) os << " * ";
    render_term(os, kernel.inputs[i]);
  }
  return os.str();
}

}  // namespace einfuzz
