#include "einfuzz/backend.hpp"

#include <algorithm>
#include <stdexcept>

#include "einfuzz/errors.hpp"
#include "einfuzz/eval.hpp"
#include "einfuzz/json_io.hpp"

namespace einfuzz {

std::string_view outcome_kind_name(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::Success: return "success";
    case OutcomeKind::Rejected: return "rejected";
    case OutcomeKind::Crashed: return "crashed";
    case OutcomeKind::TimedOut: return "timeout";
  }
  return "crashed";
}

ExecutionOutcome ExecutionOutcome::success(TensorData out) {
  return {OutcomeKind::Success, std::move(out), ""};
}
ExecutionOutcome ExecutionOutcome::rejected(std::string message) {
  return {OutcomeKind::Rejected, std::nullopt, std::move(message)};
}
ExecutionOutcome ExecutionOutcome::crashed(std::string detail) {
  return {OutcomeKind::Crashed, std::nullopt, std::move(detail)};
}
ExecutionOutcome ExecutionOutcome::timed_out() {
  return {OutcomeKind::TimedOut, std::nullopt, "wall-clock limit exceeded"};
}

namespace {

// Shared frontend: decode the document, validate, store each input in its
// assigned format. Returns the rejection outcome when anything falls short.
struct DecodedRequest {
  KernelBundle bundle;
  std::map<std::string, StoredTensor> stored;
};

std::optional<ExecutionOutcome> decode_request(const ExecutionRequest& req,
                                               DecodedRequest& out) {
  try {
    out.bundle = kernel_from_json(req.document);
  } catch (const std::exception& e) {
    return ExecutionOutcome::rejected(std::string("bad document: ") + e.what());
  }
  const ValidationReport report = validate(out.bundle.kernel);
  if (!report.ok) {
    return ExecutionOutcome::rejected("invalid kernel: " + report.violations.front());
  }
  try {
    for (const TensorTerm& term : out.bundle.kernel.inputs) {
      out.stored.emplace(term.name,
                         store(out.bundle.inputs.at(term.name), term.format));
    }
  } catch (const FormatError& e) {
    return ExecutionOutcome::rejected(e.what());
  }
  return std::nullopt;
}

std::vector<const TensorTerm*> all_terms(const EinsumKernel& kernel) {
  std::vector<const TensorTerm*> all{&kernel.output};
  for (const TensorTerm& t : kernel.inputs) all.push_back(&t);
  return all;
}

ExecutionOutcome run_reference_engine(const DecodedRequest& decoded) {
  try {
    return ExecutionOutcome::success(
        eval_formatted(decoded.bundle.kernel, decoded.stored));
  } catch (const std::exception& e) {
    // A valid, decodable request cannot get here; stay total regardless.
    return ExecutionOutcome::rejected(std::string("execution failed: ") + e.what());
  }
}

}  // namespace

ExecutionOutcome RefBackend::execute(const ExecutionRequest& req) const {
  DecodedRequest decoded;
  if (auto rejection = decode_request(req, decoded)) return *rejection;
  return run_reference_engine(decoded);
}

std::string_view fault_name(Fault f) {
  switch (f) {
    case Fault::StaleOutputCursor: return "stale-output-cursor";
    case Fault::CrashOnRank3: return "crash-on-rank3";
    case Fault::CrashOnCoo: return "crash-on-coo";
  }
  return "stale-output-cursor";
}

std::optional<Fault> fault_from_name(std::string_view name) {
  if (name == "stale-output-cursor") return Fault::StaleOutputCursor;
  if (name == "crash-on-rank3") return Fault::CrashOnRank3;
  if (name == "crash-on-coo") return Fault::CrashOnCoo;
  return std::nullopt;
}

std::string FaultyBackend::id() const {
  std::string id = "faulty:";
  bool first = true;
  for (Fault f : faults_) {
    if (!first) id += ',';
    id += fault_name(f);
    first = false;
  }
  return id;
}

namespace {

// The seeded miscompilation. The correct assembly of a compressed output has
// to re-find (or re-initialize the cursor for) a cell's slot on every
// reduction sweep so later contributions accumulate; this engine instead
// keeps appending, so each output cell retains the first nonzero
// contribution it ever received and the rest are lost.
TensorData eval_stale_cursor(const EinsumKernel& kernel,
                             const std::map<std::string, TensorData>& inputs) {
  std::vector<IndexVar> axes;
  for (IndexVar v : kernel.used_indices()) axes.push_back(v);
  const auto pos_of = [&](IndexVar v) {
    return static_cast<std::size_t>(
        std::find(axes.begin(), axes.end(), v) - axes.begin());
  };

  struct Operand {
    std::vector<double> values;
    std::vector<std::int64_t> strides;  // per axis, 0 when unused
  };
  std::vector<Operand> operands;
  for (const TensorTerm& term : kernel.inputs) {
    Operand op;
    op.values = inputs.at(term.name).to_dense();
    op.strides.assign(axes.size(), 0);
    std::int64_t stride = 1;
    for (std::size_t d = term.indices.size(); d-- > 0;) {
      op.strides[pos_of(term.indices[d])] = stride;
      stride *= kernel.dims.at(term.indices[d]);
    }
    operands.push_back(std::move(op));
  }

  const std::vector<std::int64_t> out_shape = kernel.term_shape(kernel.output);
  std::int64_t out_cells = 1;
  for (std::int64_t d : out_shape) out_cells *= d;
  std::vector<std::int64_t> out_strides(axes.size(), 0);
  {
    std::int64_t stride = 1;
    for (std::size_t d = kernel.output.indices.size(); d-- > 0;) {
      out_strides[pos_of(kernel.output.indices[d])] = stride;
      stride *= out_shape[d];
    }
  }

  std::vector<std::size_t> sweep_axis;  // contraction indices, label order
  std::vector<std::int64_t> sweep_ext;
  std::vector<std::size_t> cell_axis;  // output indices, term order
  std::vector<std::int64_t> cell_ext;
  for (IndexVar v : kernel.contraction_indices()) {
    sweep_axis.push_back(pos_of(v));
    sweep_ext.push_back(kernel.dims.at(v));
  }
  for (IndexVar v : kernel.output.indices) {
    cell_axis.push_back(pos_of(v));
    cell_ext.push_back(kernel.dims.at(v));
  }

  auto advance = [](std::vector<std::int64_t>& idx,
                    const std::vector<std::int64_t>& ext) {
    for (std::size_t d = idx.size(); d-- > 0;) {
      if (++idx[d] < ext[d]) return true;
      idx[d] = 0;
    }
    return false;
  };

  std::vector<double> out(static_cast<std::size_t>(out_cells), 0.0);
  std::vector<bool> claimed(static_cast<std::size_t>(out_cells), false);
  std::vector<std::int64_t> assignment(axes.size(), 0);
  std::vector<std::int64_t> sweep(sweep_axis.size(), 0);

  do {  // outer loop: one pass per reduction sweep — where the cursor rots
    for (std::size_t j = 0; j < sweep_axis.size(); ++j) {
      assignment[sweep_axis[j]] = sweep[j];
    }
    std::vector<std::int64_t> cell(cell_axis.size(), 0);
    do {
      for (std::size_t j = 0; j < cell_axis.size(); ++j) {
        assignment[cell_axis[j]] = cell[j];
      }
      double prod = 1.0;
      for (const Operand& op : operands) {
        std::int64_t off = 0;
        for (std::size_t a = 0; a < axes.size(); ++a) {
          off += assignment[a] * op.strides[a];
        }
        prod *= op.values[static_cast<std::size_t>(off)];
      }
      if (prod != 0.0) {
        std::int64_t off = 0;
        for (std::size_t a = 0; a < axes.size(); ++a) {
          off += assignment[a] * out_strides[a];
        }
        const auto slot = static_cast<std::size_t>(off);
        if (!claimed[slot]) {  // later sweeps never find the existing slot
          out[slot] = prod;
          claimed[slot] = true;
        }
      }
    } while (advance(cell, cell_ext));
  } while (advance(sweep, sweep_ext));

  return TensorData::from_dense(out_shape, out);
}

bool is_compressed(StorageFormat f) { return f != StorageFormat::Dense; }

}  // namespace

ExecutionOutcome FaultyBackend::execute(const ExecutionRequest& req) const {
  DecodedRequest decoded;
  if (auto rejection = decode_request(req, decoded)) return *rejection;
  const EinsumKernel& kernel = decoded.bundle.kernel;

  if (faults_.contains(Fault::CrashOnCoo)) {
    for (const TensorTerm* term : all_terms(kernel)) {
      if (term->format == StorageFormat::Coo) {
        return ExecutionOutcome::crashed("aborted lowering coo tensor " + term->name);
      }
    }
  }

  if (faults_.contains(Fault::CrashOnRank3)) {
    for (const TensorTerm* term : all_terms(kernel)) {
      if (term->rank() >= 3 && is_compressed(term->format)) {
        return ExecutionOutcome::crashed("aborted lowering rank-" +
                                         std::to_string(term->rank()) +
                                         " compressed tensor " + term->name);
      }
    }
  }

  if (faults_.contains(Fault::StaleOutputCursor) &&
      is_compressed(kernel.output.format)) {
    try {
      return ExecutionOutcome::success(
          eval_stale_cursor(kernel, decoded.bundle.inputs));
    } catch (const std::exception& e) {
      return ExecutionOutcome::rejected(std::string("execution failed: ") + e.what());
    }
  }

  return run_reference_engine(decoded);
}

std::unique_ptr<Backend> make_backend(std::string_view spec) {
  if (spec == "ref") return std::make_unique<RefBackend>();
  if (spec == "faulty" || spec.starts_with("faulty:")) {
    std::set<Fault> faults;
    std::string_view rest = spec == "faulty" ? "" : spec.substr(7);
    while (!rest.empty()) {
      const std::size_t comma = rest.find(',');
      const std::string_view name = rest.substr(0, comma);
      const auto fault = fault_from_name(name);
      if (!fault) {
        throw BackendConfigError("unknown fault '" + std::string(name) + "'");
      }
      faults.insert(*fault);
      rest = comma == std::string_view::npos ? "" : rest.substr(comma + 1);
    }
    return std::make_unique<FaultyBackend>(std::move(faults));
  }
  if (spec.starts_with("cmd:")) {
    return std::make_unique<SubprocessBackend>(std::string(spec.substr(4)));
  }
  throw BackendConfigError("unknown backend spec '" + std::string(spec) + "'");
}

std::optional<Dialect> dialect_from_name(std::string_view name) {
  if (name == "taco-cpp") return Dialect::TacoCpp;
  if (name == "finch-julia") return Dialect::FinchJulia;
  return std::nullopt;
}

}  // namespace einfuzz
