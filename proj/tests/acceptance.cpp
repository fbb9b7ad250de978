// Acceptance suite: runs every release criterion end to end and prints one
// pass/fail line each. Criteria that specify the CLI go through the real
// binary (path = argv[1]); the rest drive the library directly.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "einfuzz/backend.hpp"
#include "einfuzz/eval.hpp"
#include "einfuzz/generator.hpp"
#include "einfuzz/harness.hpp"
#include "einfuzz/json_io.hpp"
#include "einfuzz/mutation.hpp"
#include "einfuzz/rng.hpp"

using namespace einfuzz;

namespace {

std::string g_cli;

struct CliResult {
  int exit_code = -1;
  std::string stdout_text;
};

CliResult run_cli(const std::string& args) {
  const std::string command = g_cli + " " + args + " 2>/dev/null";
  FILE* pipe = popen(command.c_str(), "r");
  if (pipe == nullptr) throw std::runtime_error("popen failed: " + command);
  CliResult result;
  char buf[1 << 16];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) {
    result.stdout_text.append(buf, n);
  }
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

EinsumKernel worked_kernel(StorageFormat b, StorageFormat c, StorageFormat a) {
  EinsumKernel kernel;
  kernel.dtype = Dtype::Int;
  kernel.output = {"A", {IndexVar('j')}, a};
  kernel.inputs = {{"B", {IndexVar('i'), IndexVar('j')}, b},
                   {"C", {IndexVar('i')}, c}};
  kernel.dims = {{IndexVar('i'), 3}, {IndexVar('j'), 3}};
  return kernel;
}

std::map<std::string, TensorData> worked_inputs() {
  return {{"B", TensorData({3, 3}, {{{0, 1}, 4.0},
                                    {{1, 0}, 2.0},
                                    {{1, 1}, 8.0},
                                    {{2, 0}, 1.0}})},
          {"C", TensorData({3}, {{{1}, 2.0}, {{2}, 5.0}})}};
}

const TensorData kWorkedResult({3}, {{{0}, 9.0}, {{1}, 16.0}});

std::filesystem::path fresh_dir(const std::string& tag) {
  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / ("einfuzz-acceptance-" + tag);
  std::filesystem::remove_all(dir);
  return dir;
}

// ---- criteria ------------------------------------------------------------

// 1. 1e5 kernels from `gen` with the default config all pass validate,
//    within the runtime budget.
bool generator_validity(std::string& detail) {
  const auto t0 = std::chrono::steady_clock::now();
  const CliResult out = run_cli("gen --count 100000 --seed 1");
  if (out.exit_code != 0) {
    detail = "gen exited with " + std::to_string(out.exit_code);
    return false;
  }
  std::istringstream lines(out.stdout_text);
  std::string line;
  std::uint64_t total = 0, ok = 0;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    ++total;
    const KernelBundle bundle = kernel_from_json(nlohmann::json::parse(line));
    if (validate(bundle.kernel).ok) ++ok;
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream os;
  os << ok << "/" << total << " valid in " << seconds << "s";
  detail = os.str();
  return total == 100000 && ok == total && seconds < 60.0;
}

// 2. CFG baseline validity materially below 15%; the constraint generator
//    through the same checker scores 100%.
bool baseline_disparity(std::string& detail) {
  const auto t0 = std::chrono::steady_clock::now();
  const CliResult cfg = run_cli("baseline --samples 100000 --seed 1");
  const CliResult constraint =
      run_cli("baseline --samples 100000 --seed 1 --generator constraint");
  if (cfg.exit_code != 0 || constraint.exit_code != 0) {
    detail = "baseline exited nonzero";
    return false;
  }
  const double cfg_rate =
      nlohmann::json::parse(cfg.stdout_text)["validity_rate"].get<double>();
  const double constraint_rate =
      nlohmann::json::parse(constraint.stdout_text)["validity_rate"].get<double>();
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream os;
  os << "cfg " << cfg_rate << ", constraint " << constraint_rate << " in "
     << seconds << "s";
  detail = os.str();
  return cfg_rate < 0.15 && constraint_rate == 1.0 && seconds < 120.0;
}

// 3. The worked kernel evaluates to {(0):9,(1):16} on the reference backend
//    under every applicable storage assignment of B, C and A.
bool worked_kernel_everywhere(std::string& detail) {
  RefBackend backend;
  const auto inputs = worked_inputs();
  int combos = 0;
  for (StorageFormat b : applicable_formats(2)) {
    for (StorageFormat c : applicable_formats(1)) {
      for (StorageFormat a : applicable_formats(1)) {
        const EinsumKernel kernel = worked_kernel(b, c, a);
        const ExecutionOutcome outcome =
            backend.execute({kernel_to_json(kernel, inputs), 30000, 0});
        if (outcome.kind != OutcomeKind::Success ||
            !(*outcome.output == kWorkedResult)) {
          detail = "diverged with B=" + std::string(format_name(b)) +
                   " C=" + std::string(format_name(c)) +
                   " A=" + std::string(format_name(a));
          return false;
        }
        ++combos;
      }
    }
  }
  detail = std::to_string(combos) + " format combinations exact";
  return combos == 16;
}

// 4. Formatted engine equals the dense oracle exactly on 1e4 random Int
//    kernels, several format assignments each.
bool engine_agreement(std::string& detail) {
  GenConfig cfg;
  std::uint64_t assignments = 0;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    Rng rng(derive_seed(1001, i));
    const EinsumKernel kernel = generate_kernel(cfg, rng);
    const auto inputs = generate_inputs(kernel, cfg, rng);
    const TensorData expected = eval_dense(kernel, inputs);

    std::vector<EinsumKernel> variants{kernel};
    for (int v = 0; v < 3; ++v) {
      std::map<std::string, StorageFormat> assignment{
          {kernel.output.name,
           rng.pick(applicable_formats(kernel.output.rank()))}};
      for (const TensorTerm& term : kernel.inputs) {
        assignment.emplace(term.name, rng.pick(applicable_formats(term.rank())));
      }
      variants.push_back(mutate_formats(kernel, assignment).kernel);
    }
    for (const EinsumKernel& variant : variants) {
      std::map<std::string, StoredTensor> stored;
      for (const TensorTerm& term : variant.inputs) {
        stored.emplace(term.name, store(inputs.at(term.name), term.format));
      }
      if (!(eval_formatted(variant, stored) == expected)) {
        detail = "mismatch on " + render(variant);
        return false;
      }
      ++assignments;
    }
  }
  detail = std::to_string(assignments) + " assignments, zero mismatches";
  return true;
}

// 5. Fuzzing the reference backend is sound: no bugs, no rejections.
bool oracle_soundness(std::string& detail) {
  const auto t0 = std::chrono::steady_clock::now();
  const CliResult out =
      run_cli("fuzz --backend ref --iterations 10000 --dtype int --seed 1");
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (out.exit_code != 0) {
    detail = "fuzz exited with " + std::to_string(out.exit_code);
    return false;
  }
  const nlohmann::json stats = nlohmann::json::parse(out.stdout_text);
  std::ostringstream os;
  os << stats["pass"].get<std::uint64_t>() << " pass in " << seconds << "s";
  detail = os.str();
  return stats["iterations"] == 10000 && stats["pass"] == 10000 &&
         stats["stc_na"] == 0 && stats["crash"] == 0 &&
         stats["wrong_code"] == 0 && seconds < 300.0;
}

// 6. The seeded miscompilation is detected; every report replays to the same
//    verdict on the faulty backend and to Pass on ref; dense-output variants
//    of the reported kernels compute correctly on the faulty backend.
bool seeded_fault_detection(std::string& detail) {
  const std::filesystem::path dir = fresh_dir("stale");
  const CliResult out = run_cli(
      "fuzz --backend faulty:stale-output-cursor --iterations 1000 --dtype int "
      "--seed 1 --out " +
      dir.string());
  if (out.exit_code != 1) {  // bugs found -> exit 1
    detail = "expected exit 1, got " + std::to_string(out.exit_code);
    return false;
  }
  const nlohmann::json stats = nlohmann::json::parse(out.stdout_text);
  if (stats["wrong_code"].get<std::uint64_t>() < 1) {
    detail = "no wrong-code bugs reported";
    return false;
  }

  FaultyBackend faulty({Fault::StaleOutputCursor});
  RefBackend ref;
  std::uint64_t reports = 0, dense_checked = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir / "reports")) {
    ++reports;
    const Verdict again = replay(entry.path(), faulty);
    if (again.kind != VerdictKind::WrongCodeBug) {
      detail = entry.path().filename().string() + " did not replay to wrong_code";
      return false;
    }
    const Verdict fixed = replay(entry.path(), ref);
    if (fixed.kind != VerdictKind::Pass) {
      detail = entry.path().filename().string() + " did not pass on ref";
      return false;
    }

    // dense-output mutants never diverge from the true result
    std::ifstream in(entry.path());
    const nlohmann::json report = nlohmann::json::parse(in);
    const KernelBundle bundle = kernel_from_json(report["request"]);
    const TensorData truth = eval_dense(bundle.kernel, bundle.inputs);
    for (const nlohmann::json& node : report["mutants"]) {
      const MutationProvenance provenance = provenance_from_json(node);
      if (provenance.formats.at(bundle.kernel.output.name) != StorageFormat::Dense) {
        continue;
      }
      const Mutant mutant = apply_provenance(bundle.kernel, provenance);
      const ExecutionOutcome outcome =
          faulty.execute({kernel_to_json(mutant.kernel, bundle.inputs), 30000, 0});
      if (outcome.kind != OutcomeKind::Success || !(*outcome.output == truth)) {
        detail = "a dense-output mutant diverged in " +
                 entry.path().filename().string();
        return false;
      }
      ++dense_checked;
    }
  }
  std::filesystem::remove_all(dir);
  std::ostringstream os;
  os << stats["wrong_code"].get<std::uint64_t>() << " wrong-code bugs, " << reports
     << " reports replayed, " << dense_checked << " dense-output mutants correct";
  detail = os.str();
  return reports == stats["wrong_code"].get<std::uint64_t>() && dense_checked > 0;
}

// 7. Crash faults classify as CrashBug and the verdict partition sums.
bool crash_classification(std::string& detail) {
  const CliResult out = run_cli(
      "fuzz --backend faulty:crash-on-rank3 --iterations 1000 --dtype int --seed 1");
  if (out.exit_code != 1) {
    detail = "expected exit 1, got " + std::to_string(out.exit_code);
    return false;
  }
  const nlohmann::json stats = nlohmann::json::parse(out.stdout_text);
  const std::uint64_t total = stats["pass"].get<std::uint64_t>() +
                              stats["stc_na"].get<std::uint64_t>() +
                              stats["crash"].get<std::uint64_t>() +
                              stats["wrong_code"].get<std::uint64_t>();
  std::ostringstream os;
  os << stats["crash"].get<std::uint64_t>() << " crash bugs, partition " << total
     << "/" << stats["iterations"].get<std::uint64_t>();
  detail = os.str();
  return stats["crash"].get<std::uint64_t>() >= 1 &&
         total == stats["iterations"].get<std::uint64_t>();
}

// 8. Storage and serialization round-trips: store/materialize identity on 1e4
//    random tensors, JSON and text identity on 1e4 generated kernels.
bool round_trips(std::string& detail) {
  std::uint64_t tensor_cases = 0;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    Rng rng(derive_seed(1002, i));
    const auto rank = static_cast<std::size_t>(rng.range(0, 3));
    std::vector<std::int64_t> shape;
    std::int64_t cells = 1;
    for (std::size_t d = 0; d < rank; ++d) {
      shape.push_back(rng.range(1, 5));
      cells *= shape.back();
    }
    std::vector<double> dense(static_cast<std::size_t>(cells), 0.0);
    for (double& v : dense) {
      if (rng.chance(0.5)) v = static_cast<double>(rng.range(-9, 9));
    }
    const TensorData t = TensorData::from_dense(shape, dense);
    for (StorageFormat f : applicable_formats(t.rank())) {
      if (!(materialize(store(t, f)) == t)) {
        detail = "store/materialize broke a rank-" + std::to_string(rank) +
                 " tensor under " + std::string(format_name(f));
        return false;
      }
      ++tensor_cases;
    }
  }

  GenConfig cfg;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    Rng rng(derive_seed(1003, i));
    const EinsumKernel kernel = generate_kernel(cfg, rng);
    const auto inputs = generate_inputs(kernel, cfg, rng);

    const KernelBundle back = kernel_from_json(kernel_to_json(kernel, inputs));
    if (!(back.kernel == kernel) || !(back.inputs == inputs)) {
      detail = "json round-trip broke " + render(kernel);
      return false;
    }
    EinsumKernel reparsed = parse(render(kernel));
    reparsed.dims = kernel.dims;
    reparsed.dtype = kernel.dtype;
    reparsed.output.format = kernel.output.format;
    for (std::size_t t = 0; t < reparsed.inputs.size(); ++t) {
      reparsed.inputs[t].format = kernel.inputs[t].format;
    }
    if (!(reparsed == kernel)) {
      detail = "text round-trip broke " + render(kernel);
      return false;
    }
  }
  detail = std::to_string(tensor_cases) + " tensor round-trips, 10000 kernels";
  return true;
}

// 9. Comparator semantics: zero equivalence, exact-mode ULP strictness,
//    symmetric classification.
bool comparator_suite(std::string& detail) {
  const ComparatorConfig exact;
  ComparatorConfig eps;
  eps.mode = CompareMode::Epsilon;

  const TensorData dense_form =
      TensorData::from_dense({3}, std::vector<double>{9, 16, 0});
  if (!compare(dense_form, kWorkedResult, exact).equal) {
    detail = "explicit absence != implicit zero";
    return false;
  }

  const TensorData one = TensorData::from_dense({1}, std::vector<double>{1.0});
  const TensorData ulp_off = TensorData::from_dense(
      {1}, std::vector<double>{std::nextafter(1.0, 2.0)});
  if (compare(one, ulp_off, exact).equal) {
    detail = "exact mode tolerated a one-ulp difference";
    return false;
  }
  if (!compare(one, ulp_off, eps).equal) {
    detail = "epsilon defaults flagged a one-ulp difference";
    return false;
  }

  for (std::uint64_t i = 0; i < 5000; ++i) {
    Rng rng(derive_seed(1004, i));
    std::vector<double> a(3), b(3);
    for (std::size_t c = 0; c < 3; ++c) {
      a[c] = rng.chance(0.5) ? 0.0 : rng.real(-2, 2);
      b[c] = rng.chance(0.5) ? a[c] : rng.real(-2, 2);
    }
    const TensorData ta = TensorData::from_dense({3}, a);
    const TensorData tb = TensorData::from_dense({3}, b);
    for (const ComparatorConfig* cfg :
         std::initializer_list<const ComparatorConfig*>{&exact, &eps}) {
      if (compare(ta, tb, *cfg).equal != compare(tb, ta, *cfg).equal) {
        detail = "asymmetric classification";
        return false;
      }
    }
  }
  detail = "zero equivalence, ulp strictness, symmetry over 5000 pairs";
  return true;
}

// 10. The adapter wire protocol: correct, crashing, hanging and babbling
//     adapters map to Success / Crashed / TimedOut / Crashed.
bool subprocess_protocol(std::string& detail) {
  const std::string dir = EINFUZZ_ADAPTER_DIR;
  const nlohmann::json request =
      kernel_to_json(worked_kernel(StorageFormat::Csr, StorageFormat::Dense,
                                   StorageFormat::Dense),
                     worked_inputs());

  SubprocessBackend correct("python3 " + dir + "/adapter_ref.py");
  const ExecutionOutcome ok = correct.execute({request, 30000, 0});
  if (ok.kind != OutcomeKind::Success || !(*ok.output == kWorkedResult)) {
    detail = "correct adapter did not return [9,16,0]";
    return false;
  }

  SubprocessBackend crashing(dir + "/adapter_crash.sh");
  if (crashing.execute({request, 30000, 0}).kind != OutcomeKind::Crashed) {
    detail = "nonzero exit was not Crashed";
    return false;
  }

  SubprocessBackend sleeping(dir + "/adapter_sleep.sh");
  if (sleeping.execute({request, 400, 0}).kind != OutcomeKind::TimedOut) {
    detail = "sleeping adapter was not TimedOut";
    return false;
  }

  SubprocessBackend babbling(dir + "/adapter_garbage.sh");
  if (babbling.execute({request, 30000, 0}).kind != OutcomeKind::Crashed) {
    detail = "malformed stdout was not Crashed";
    return false;
  }

  detail = "success / crashed / timed-out / crashed as specified";
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <path-to-einfuzz-cli>\n";
    return 2;
  }
  g_cli = argv[1];

  const std::vector<std::pair<std::string, std::function<bool(std::string&)>>>
      criteria{
          {"generator-validity", generator_validity},
          {"baseline-disparity", baseline_disparity},
          {"worked-kernel-all-formats", worked_kernel_everywhere},
          {"engine-agreement", engine_agreement},
          {"oracle-soundness", oracle_soundness},
          {"seeded-fault-detection", seeded_fault_detection},
          {"crash-classification", crash_classification},
          {"round-trips", round_trips},
          {"comparator-suite", comparator_suite},
          {"subprocess-protocol", subprocess_protocol},
      };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    std::string detail;
    bool ok = false;
    try {
      ok = criteria[i].second(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::cout << (ok ? "PASS" : "FAIL") << "  " << i + 1 << ". "
              << criteria[i].first << (detail.empty() ? "" : " — " + detail)
              << std::endl;
    if (!ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
