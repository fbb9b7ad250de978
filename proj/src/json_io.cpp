#include "einfuzz/json_io.hpp"

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>

#include "einfuzz/errors.hpp"

namespace einfuzz {

namespace {

constexpr double kSafeIntBound = 9007199254740992.0;  // 2^53

const nlohmann::json& field(const nlohmann::json& node, const char* key,
                            const std::string& path) {
  auto it = node.find(key);
  if (it == node.end()) {
    throw SchemaError("missing field '" + path + "'");
  }
  return *it;
}

std::string coord_text(const std::vector<std::int64_t>& coord) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < coord.size(); ++i) {
    if (i > 0) os << ',';
    os << coord[i];
  }
  os << ')';
  return os.str();
}

nlohmann::json term_to_json(const TensorTerm& term) {
  nlohmann::json indices = nlohmann::json::array();
  for (IndexVar v : term.indices) indices.push_back(std::string(1, v.label()));
  return {{"name", term.name},
          {"indices", std::move(indices)},
          {"format", std::string(format_name(term.format))}};
}

TensorTerm term_from_json(const nlohmann::json& node, const std::string& path) {
  if (!node.is_object()) throw SchemaError("'" + path + "' must be an object");
  TensorTerm term;

  const nlohmann::json& name = field(node, "name", path + ".name");
  if (!name.is_string() || name.get<std::string>().empty()) {
    throw SchemaError("'" + path + ".name' must be a non-empty string");
  }
  term.name = name.get<std::string>();

  const nlohmann::json& indices = field(node, "indices", path + ".indices");
  if (!indices.is_array()) {
    throw SchemaError("'" + path + ".indices' must be an array");
  }
  for (const auto& idx : indices) {
    if (!idx.is_string() || idx.get<std::string>().size() != 1 ||
        idx.get<std::string>()[0] < 'a' || idx.get<std::string>()[0] > 'z') {
      throw SchemaError("'" + path +
                        ".indices' entries must be single lowercase letters");
    }
    term.indices.emplace_back(idx.get<std::string>()[0]);
  }

  const nlohmann::json& fmt = field(node, "format", path + ".format");
  if (!fmt.is_string()) throw SchemaError("'" + path + ".format' must be a string");
  const auto parsed = format_from_name(fmt.get<std::string>());
  if (!parsed) {
    throw SchemaError("unknown format '" + fmt.get<std::string>() + "' in '" +
                      path + "'");
  }
  term.format = *parsed;
  return term;
}

}  // namespace

nlohmann::json tensor_to_json(const TensorData& t, Dtype dtype) {
  nlohmann::json coords = nlohmann::json::array();
  nlohmann::json values = nlohmann::json::array();
  for (const TensorEntry& e : t.entries()) {
    nlohmann::json coord = nlohmann::json::array();
    for (std::int64_t c : e.coord) coord.push_back(c);
    coords.push_back(std::move(coord));
    if (dtype == Dtype::Int) {
      values.push_back(static_cast<std::int64_t>(e.value));
    } else {
      values.push_back(e.value);
    }
  }
  return {{"coords", std::move(coords)}, {"values", std::move(values)}};
}

TensorData tensor_from_json(const nlohmann::json& node,
                            const std::vector<std::int64_t>& shape, Dtype dtype,
                            const std::string& what) {
  if (!node.is_object()) throw SchemaError("'" + what + "' must be an object");
  const nlohmann::json& coords = field(node, "coords", what + ".coords");
  const nlohmann::json& values = field(node, "values", what + ".values");
  if (!coords.is_array() || !values.is_array()) {
    throw SchemaError("'" + what + "' coords/values must be arrays");
  }
  if (coords.size() != values.size()) {
    throw SchemaError("'" + what + "' coords/values lengths disagree");
  }

  std::vector<TensorEntry> entries;
  entries.reserve(coords.size());
  for (std::size_t k = 0; k < coords.size(); ++k) {
    const nlohmann::json& cnode = coords[k];
    if (!cnode.is_array() || cnode.size() != shape.size()) {
      throw SchemaError("'" + what + ".coords' entries must have arity " +
                        std::to_string(shape.size()));
    }
    TensorEntry e;
    e.coord.reserve(shape.size());
    for (std::size_t d = 0; d < shape.size(); ++d) {
      if (!cnode[d].is_number_integer()) {
        throw SchemaError("'" + what + ".coords' entries must be integers");
      }
      e.coord.push_back(cnode[d].get<std::int64_t>());
    }
    for (std::size_t d = 0; d < shape.size(); ++d) {
      if (e.coord[d] < 0 || e.coord[d] >= shape[d]) {
        throw ShapeMismatchError("coordinate " + coord_text(e.coord) +
                                 " out of range for '" + what + "'");
      }
    }
    if (k > 0 && !coord_less(entries.back().coord, e.coord)) {
      throw SchemaError("'" + what + ".coords' not sorted strictly increasing at " +
                        coord_text(e.coord));
    }

    const nlohmann::json& vnode = values[k];
    if (dtype == Dtype::Int) {
      if (!vnode.is_number_integer()) {
        throw SchemaError("'" + what + ".values' must be integers for int dtype");
      }
      const double v = static_cast<double>(vnode.get<std::int64_t>());
      if (std::abs(v) > kSafeIntBound) {
        throw SchemaError("'" + what + ".values' outside the 53-bit-safe range");
      }
      e.value = v;
    } else {
      if (!vnode.is_number()) {
        throw SchemaError("'" + what + ".values' must be numbers");
      }
      e.value = vnode.get<double>();
    }
    if (e.value == 0.0) {
      throw SchemaError("'" + what + ".values' contains an explicit zero");
    }
    entries.push_back(std::move(e));
  }

  try {
    return TensorData(shape, std::move(entries));
  } catch (const std::invalid_argument& e) {
    throw SchemaError("'" + what + "': " + e.what());
  }
}

nlohmann::json kernel_to_json(const EinsumKernel& kernel,
                              const std::map<std::string, TensorData>& inputs) {
  const ValidationReport report = validate(kernel);
  if (!report.ok) {
    throw std::invalid_argument("kernel must validate before serialization: " +
                                report.violations.front());
  }

  nlohmann::json input_terms = nlohmann::json::array();
  nlohmann::json tensors = nlohmann::json::object();
  for (const TensorTerm& term : kernel.inputs) {
    input_terms.push_back(term_to_json(term));
    auto it = inputs.find(term.name);
    if (it == inputs.end()) {
      throw std::invalid_argument("missing tensor data for input " + term.name);
    }
    if (it->second.shape() != kernel.term_shape(term)) {
      throw std::invalid_argument("tensor " + term.name + " does not match dims");
    }
    if (kernel.dtype == Dtype::Int) {
      for (const TensorEntry& e : it->second.entries()) {
        if (e.value != std::floor(e.value) || std::abs(e.value) > kSafeIntBound) {
          throw std::invalid_argument("tensor " + term.name +
                                      " holds non-integer values under int dtype");
        }
      }
    }
    tensors[term.name] = tensor_to_json(it->second, kernel.dtype);
  }

  nlohmann::json dims = nlohmann::json::object();
  for (const auto& [v, extent] : kernel.dims) {
    dims[std::string(1, v.label())] = extent;
  }

  return {{"version", 1},
          {"dtype", std::string(dtype_name(kernel.dtype))},
          {"kernel",
           {{"output", term_to_json(kernel.output)},
            {"inputs", std::move(input_terms)}}},
          {"dims", std::move(dims)},
          {"tensors", std::move(tensors)}};
}

KernelBundle kernel_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw SchemaError("document must be a JSON object");

  const nlohmann::json& version = field(doc, "version", "version");
  if (!version.is_number_integer() || version.get<std::int64_t>() != 1) {
    throw SchemaError("unsupported document version");
  }

  KernelBundle bundle;

  const nlohmann::json& dtype = field(doc, "dtype", "dtype");
  if (!dtype.is_string()) throw SchemaError("'dtype' must be a string");
  const auto parsed_dtype = dtype_from_name(dtype.get<std::string>());
  if (!parsed_dtype) {
    throw SchemaError("unknown dtype '" + dtype.get<std::string>() + "'");
  }
  bundle.kernel.dtype = *parsed_dtype;

  const nlohmann::json& kernel_node = field(doc, "kernel", "kernel");
  if (!kernel_node.is_object()) throw SchemaError("'kernel' must be an object");
  bundle.kernel.output =
      term_from_json(field(kernel_node, "output", "kernel.output"), "kernel.output");

  const nlohmann::json& input_nodes =
      field(kernel_node, "inputs", "kernel.inputs");
  if (!input_nodes.is_array()) throw SchemaError("'kernel.inputs' must be an array");
  if (input_nodes.empty()) throw SchemaError("inputs must be non-empty");
  for (std::size_t i = 0; i < input_nodes.size(); ++i) {
    bundle.kernel.inputs.push_back(term_from_json(
        input_nodes[i], "kernel.inputs[" + std::to_string(i) + "]"));
  }

  const nlohmann::json& dims = field(doc, "dims", "dims");
  if (!dims.is_object()) throw SchemaError("'dims' must be an object");
  for (const auto& [key, value] : dims.items()) {
    if (key.size() != 1 || key[0] < 'a' || key[0] > 'z') {
      throw SchemaError("'dims' keys must be single lowercase letters");
    }
    if (!value.is_number_integer() || value.get<std::int64_t>() <= 0) {
      throw SchemaError("'dims." + key + "' must be a positive integer");
    }
    bundle.kernel.dims[IndexVar(key[0])] = value.get<std::int64_t>();
  }

  const nlohmann::json& tensors = field(doc, "tensors", "tensors");
  if (!tensors.is_object()) throw SchemaError("'tensors' must be an object");
  for (const TensorTerm& term : bundle.kernel.inputs) {
    auto it = tensors.find(term.name);
    if (it == tensors.end()) {
      throw SchemaError("missing tensor data for '" + term.name + "'");
    }
    std::vector<std::int64_t> shape;
    for (IndexVar v : term.indices) {
      auto dim = bundle.kernel.dims.find(v);
      if (dim == bundle.kernel.dims.end()) {
        throw SchemaError(std::string("dims missing entry for index '") +
                          v.label() + "'");
      }
      shape.push_back(dim->second);
    }
    bundle.inputs.emplace(
        term.name, tensor_from_json(*it, shape, bundle.kernel.dtype,
                                    "tensors." + term.name));
  }
  for (const auto& [name, node] : tensors.items()) {
    (void)node;
    bool known = false;
    for (const TensorTerm& term : bundle.kernel.inputs) {
      if (term.name == name) known = true;
    }
    if (!known) throw SchemaError("tensor data for unknown tensor '" + name + "'");
  }

  return bundle;
}

}  // namespace einfuzz
