#include <sstream>

#include "einfuzz/backend.hpp"
#include "einfuzz/errors.hpp"
#include "einfuzz/json_io.hpp"

namespace einfuzz {

namespace {

std::string index_list(const TensorTerm& term, const char* sep) {
  std::ostringstream os;
  for (std::size_t i = 0; i < term.indices.size(); ++i) {
    if (i > 0) os << sep;
    os << term.indices[i].label();
  }
  return os.str();
}

std::string taco_format_expr(const TensorTerm& term) {
  switch (term.format) {
    case StorageFormat::Dense: {
      std::ostringstream os;
      os << "Format({";
      for (std::size_t d = 0; d < term.rank(); ++d) {
        if (d > 0) os << ", ";
        os << "Dense";
      }
      os << "})";
      return os.str();
    }
    case StorageFormat::Csr:
      return "Format({Dense, Sparse})";
    case StorageFormat::Csc:
      return "Format({Dense, Sparse}, {1, 0})";
    case StorageFormat::Coo:
      return "COO(" + std::to_string(term.rank()) + ")";
  }
  throw FormatError("unknown storage format");
}

void taco_value(std::ostringstream& os, double v, Dtype dtype) {
  if (dtype == Dtype::Int) {
    os << static_cast<std::int64_t>(v);
  } else {
    os.precision(17);
    os << v;
  }
}

std::string emit_taco(const KernelBundle& bundle) {
  const EinsumKernel& kernel = bundle.kernel;
  const char* scalar = kernel.dtype == Dtype::Int ? "int64_t" : "double";

  std::ostringstream os;
  os << "// " << render(kernel) << "\n";
  os << "#include \"taco.h\"\n";
  os << "#include <cstdint>\n";
  os << "#include <iostream>\n";
  os << "#include <vector>\n";
  os << "using namespace taco;\n\n";
  os << "int main() {\n";

  std::vector<const TensorTerm*> terms;
  for (const TensorTerm& t : kernel.inputs) terms.push_back(&t);
  terms.push_back(&kernel.output);

  for (const TensorTerm* term : terms) {
    if (term->rank() == 0) {
      if (term->format != StorageFormat::Dense) {
        throw FormatError("taco-cpp emitter: rank-0 tensors must be dense");
      }
      os << "  Tensor<" << scalar << "> " << term->name << "(\"" << term->name
         << "\");\n";
      continue;
    }
    os << "  Tensor<" << scalar << "> " << term->name << "(\"" << term->name
       << "\", {";
    const std::vector<std::int64_t> shape = kernel.term_shape(*term);
    for (std::size_t d = 0; d < shape.size(); ++d) {
      if (d > 0) os << ", ";
      os << shape[d];
    }
    os << "}, " << taco_format_expr(*term) << ");\n";
  }
  os << "\n";

  for (const TensorTerm& term : kernel.inputs) {
    const TensorData& data = bundle.inputs.at(term.name);
    for (const TensorEntry& e : data.entries()) {
      os << "  " << term.name << ".insert(std::vector<int>{";
      for (std::size_t d = 0; d < e.coord.size(); ++d) {
        if (d > 0) os << ", ";
        os << e.coord[d];
      }
      os << "}, (" << scalar << ")";
      taco_value(os, e.value, kernel.dtype);
      os << ");\n";
    }
    os << "  " << term.name << ".pack();\n";
  }
  os << "\n";

  bool first = true;
  os << "  IndexVar ";
  for (IndexVar v : kernel.used_indices()) {
    if (!first) os << ", ";
    os << v.label() << "(\"" << v.label() << "\")";
    first = false;
  }
  os << ";\n";

  os << "  " << kernel.output.name << "(" << index_list(kernel.output, ",") << ") = ";
  for (std::size_t t = 0; t < kernel.inputs.size(); ++t) {
    if (t > 0) os << " * ";
    os << kernel.inputs[t].name << "(" << index_list(kernel.inputs[t], ",") << ")";
  }
  os << ";\n";
  os << "  " << kernel.output.name << ".compile();\n";
  os << "  " << kernel.output.name << ".assemble();\n";
  os << "  " << kernel.output.name << ".compute();\n\n";

  os << "  // sorted coordinate/value pairs, one per line\n";
  os << "  for (const auto& entry : iterate<" << scalar << ">("
     << kernel.output.name << ")) {\n";
  os << "    for (int c : entry.first) std::cout << c << ' ';\n";
  os << "    std::cout << entry.second << '\\n';\n";
  os << "  }\n";
  os << "  return 0;\n";
  os << "}\n";
  return os.str();
}

std::string finch_level_expr(const TensorTerm& term, const std::string& zero) {
  switch (term.format) {
    case StorageFormat::Dense: {
      std::string expr = "Element(" + zero + ")";
      for (std::size_t d = 0; d < term.rank(); ++d) expr = "Dense(" + expr + ")";
      return expr;
    }
    case StorageFormat::Coo:
      return "SparseCOO{" + std::to_string(term.rank()) + "}(Element(" + zero + "))";
    case StorageFormat::Csr:
      return "Dense(SparseList(Element(" + zero + ")))";
    case StorageFormat::Csc:
      // would need a mode permutation on top of Dense(SparseList(...))
      throw FormatError("finch-julia emitter cannot express csc storage");
  }
  throw FormatError("unknown storage format");
}

void finch_value(std::ostringstream& os, double v, Dtype dtype) {
  if (dtype == Dtype::Int) {
    os << static_cast<std::int64_t>(v);
  } else {
    os.precision(17);
    os << v;
  }
}

std::string emit_finch(const KernelBundle& bundle) {
  const EinsumKernel& kernel = bundle.kernel;
  const std::string zero =
      kernel.dtype == Dtype::Int ? "zero(Int64)" : "zero(Float64)";
  const std::string eltype = kernel.dtype == Dtype::Int ? "Int64" : "Float64";

  std::ostringstream os;
  os << "# " << render(kernel) << "\n";
  os << "using Finch\n\n";

  for (const TensorTerm& term : kernel.inputs) {
    const TensorData& data = bundle.inputs.at(term.name);
    if (term.rank() == 0) {
      os << term.name << " = Tensor(Element(" << zero << "))\n";
      os << term.name << "[] = ";
      finch_value(os, data.entries().empty() ? 0.0 : data.entries()[0].value,
                  kernel.dtype);
      os << "\n";
      continue;
    }
    // build from 1-based coordinate vectors, then convert into the format
    os << term.name << "_coo = fsparse(";
    for (std::size_t d = 0; d < term.rank(); ++d) {
      os << "[";
      bool first = true;
      for (const TensorEntry& e : data.entries()) {
        if (!first) os << ", ";
        os << e.coord[d] + 1;
        first = false;
      }
      os << "], ";
    }
    os << eltype << "[";
    bool first = true;
    for (const TensorEntry& e : data.entries()) {
      if (!first) os << ", ";
      finch_value(os, e.value, kernel.dtype);
      first = false;
    }
    os << "], (";
    const std::vector<std::int64_t> shape = kernel.term_shape(term);
    for (std::size_t d = 0; d < shape.size(); ++d) {
      if (d > 0) os << ", ";
      os << shape[d];
    }
    if (shape.size() == 1) os << ",";
    os << "))\n";
    os << term.name << " = Tensor(" << finch_level_expr(term, zero) << ", "
       << term.name << "_coo)\n";
  }
  os << "\n";

  if (kernel.output.rank() == 0) {
    os << kernel.output.name << " = Tensor(Element(" << zero << "))\n";
  } else {
    os << kernel.output.name << " = Tensor("
       << finch_level_expr(kernel.output, zero) << ", ";
    const std::vector<std::int64_t> shape = kernel.term_shape(kernel.output);
    for (std::size_t d = 0; d < shape.size(); ++d) {
      if (d > 0) os << ", ";
      os << shape[d];
    }
    os << ")\n";
  }

  os << "@einsum " << kernel.output.name << "["
     << index_list(kernel.output, ", ") << "] += ";
  for (std::size_t t = 0; t < kernel.inputs.size(); ++t) {
    if (t > 0) os << " * ";
    os << kernel.inputs[t].name << "[" << index_list(kernel.inputs[t], ", ") << "]";
  }
  os << "\n\n";

  os << "# sorted coordinate/value pairs (0-based), one per line\n";
  if (kernel.output.rank() == 0) {
    os << "v = " << kernel.output.name << "[]\n";
    os << "v != " << zero << " && println(v)\n";
  } else {
    const std::vector<std::int64_t> shape = kernel.term_shape(kernel.output);
    std::string indent;
    for (std::size_t d = 0; d < shape.size(); ++d) {
      os << indent << "for i" << d << " in 1:" << shape[d] << "\n";
      indent += "    ";
    }
    os << indent << "v = " << kernel.output.name << "[";
    for (std::size_t d = 0; d < shape.size(); ++d) {
      if (d > 0) os << ", ";
      os << "i" << d;
    }
    os << "]\n";
    os << indent << "v != " << zero << " && println(";
    for (std::size_t d = 0; d < shape.size(); ++d) {
      os << "i" << d << " - 1, \" \", ";
    }
    os << "v)\n";
    for (std::size_t d = shape.size(); d-- > 0;) {
      indent.resize(indent.size() - 4);
      os << indent << "end\n";
    }
  }
  return os.str();
}

}  // namespace

std::string emit_source(const nlohmann::json& kernel_doc, Dialect dialect) {
  const KernelBundle bundle = kernel_from_json(kernel_doc);
  const ValidationReport report = validate(bundle.kernel);
  if (!report.ok) {
    throw std::invalid_argument("kernel must validate before emission: " +
                                report.violations.front());
  }
  switch (dialect) {
    case Dialect::TacoCpp: return emit_taco(bundle);
    case Dialect::FinchJulia: return emit_finch(bundle);
  }
  throw FormatError("unknown dialect");
}

}  // namespace einfuzz
