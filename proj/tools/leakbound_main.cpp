// leakbound: how many distinctions does this program leak?
//
//   leakbound check file.mc --policy N     bounded check of an N-distinction policy
//   leakbound capacity file.mc             smallest N the program satisfies, as bits
//   leakbound oracle file.mc               brute-force the equivalence classes
//   leakbound export-dimacs file.mc        dump the CNF instance
//   leakbound emit-driver file.mc          standalone C driver for external checkers
//   leakbound list-builtins                builtin registry

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "leakbound/builtins.hpp"
#include "leakbound/check.hpp"
#include "leakbound/cnf.hpp"
#include "leakbound/driver.hpp"
#include "leakbound/emit.hpp"
#include "leakbound/harness.hpp"
#include "leakbound/metrics.hpp"
#include "leakbound/parser.hpp"
#include "leakbound/relation.hpp"
#include "leakbound/report.hpp"
#include "leakbound/typecheck.hpp"

using namespace leakbound;

namespace {

constexpr int kExitError = 4;

struct CommonOpts {
  std::string file;
  std::string entry;  // empty: the annotated function
  int arch = 32;
  int unwind = 8;
  bool no_unwinding_assertions = false;
  std::uint64_t solver_budget = 0;  // 0: env or unlimited
  bool restarts = false;
  std::string format = "text";
};

void add_common(CLI::App* cmd, CommonOpts& o, bool needs_file = true) {
  if (needs_file)
    cmd->add_option("file", o.file, "program to analyze (.mc)")->required();
  cmd->add_option("--entry", o.entry, "entry function (default: the annotated one)");
  cmd->add_option("--arch", o.arch, "target word width for long and alignment")
      ->check(CLI::IsMember({32, 64}))
      ->capture_default_str();
  cmd->add_option("--unwind", o.unwind, "loop unwinding bound k")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_flag("--no-unwinding-assertions", o.no_unwinding_assertions,
                "skip the bound-sufficiency check; verdicts hold only up to k");
  cmd->add_option("--solver-budget", o.solver_budget,
                  "conflict budget per solver run (0 = LEAKBOUND_SOLVER_BUDGET or unlimited)");
  cmd->add_flag("--restarts", o.restarts, "enable Luby restarts in the SAT core");
  cmd->add_option("--format", o.format, "report format")
      ->check(CLI::IsMember({"text", "kv"}))
      ->capture_default_str();
}

Program load_program(const CommonOpts& o) {
  std::ifstream in(o.file);
  if (!in) throw AnalysisError("cannot open '" + o.file + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  Arch arch;
  arch.bits = o.arch;
  return typecheck(parse_program(ss.str()), arch);
}

Harness harness_for(const Program& prog, const CommonOpts& o) {
  std::string entry = o.entry.empty() ? default_entry(prog) : o.entry;
  return resolve_harness(prog, entry);
}

CheckConfig check_config(const CommonOpts& o) {
  CheckConfig cfg;
  cfg.unwind = o.unwind;
  cfg.unwinding_assertions = !o.no_unwinding_assertions;
  cfg.solver.conflict_budget = o.solver_budget;
  cfg.solver.enable_restarts = o.restarts;
  return cfg;
}

ReportMeta meta_for(const CommonOpts& o, const Harness& h, int policy) {
  ReportMeta m;
  m.file = o.file;
  m.entry = h.entry;
  m.policy = policy;
  m.unwind = o.unwind;
  m.unwinding_assertions = !o.no_unwinding_assertions;
  m.arch_bits = o.arch;
  return m;
}

ReportFormat format_of(const CommonOpts& o) {
  return o.format == "kv" ? ReportFormat::Kv : ReportFormat::Text;
}

// "name=lo..hi" -> (name, lo, hi)
struct RangeOpt {
  std::string name;
  std::uint64_t lo = 0, hi = 0;
};

RangeOpt parse_range(const std::string& s) {
  auto eq = s.find('=');
  auto dots = s.find("..", eq == std::string::npos ? 0 : eq);
  if (eq == std::string::npos || dots == std::string::npos)
    throw AnalysisError("bad --range '" + s + "'; expected name=lo..hi");
  RangeOpt r;
  r.name = s.substr(0, eq);
  r.lo = std::stoull(s.substr(eq + 1, dots - eq - 1));
  r.hi = std::stoull(s.substr(dots + 2));
  if (r.hi < r.lo) throw AnalysisError("bad --range '" + s + "': hi < lo");
  return r;
}

std::string hex_key(const std::vector<std::uint8_t>& key) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (std::uint8_t b : key) {
    s += digits[b >> 4];
    s += digits[b & 0xf];
  }
  return s;
}

std::string scalar_str(const TypePtr& t, const InputBytes& bytes) {
  Object o = make_object(t);
  o.bytes = bytes;
  Value v = read_scalar(o, 0, t);
  return is_signed_type(v.type) ? std::to_string(as_signed(v))
                                : std::to_string(as_unsigned(v));
}

int run_check(const CommonOpts& o, int policy) {
  Program prog = load_program(o);
  Harness h = harness_for(prog, o);
  CheckOutcome out = check_policy(prog, h, policy, check_config(o));
  return render_check(std::cout, format_of(o), meta_for(o, h, policy), out);
}

int run_capacity(const CommonOpts& o, int n_max) {
  Program prog = load_program(o);
  Harness h = harness_for(prog, o);
  CapacityReport rep = measure_capacity(prog, h, check_config(o), n_max);
  return render_capacity(std::cout, format_of(o), meta_for(o, h, 0), rep);
}

int run_oracle(const CommonOpts& o, const std::vector<std::string>& ranges,
               std::uint64_t budget) {
  Program prog = load_program(o);
  Harness h = harness_for(prog, o);

  std::vector<RangeOpt> rs;
  for (const auto& s : ranges) rs.push_back(parse_range(s));
  auto range_for = [&](const std::string& name) -> const RangeOpt* {
    for (const auto& r : rs)
      if (r.name == name) return &r;
    return nullptr;
  };

  InputDomain lows, highs;
  for (const auto& in : h.inputs) {
    InputDomain& d = in.role == Role::Low ? lows : highs;
    if (in.type->kind == TypeKind::Record || in.type->kind == TypeKind::Array)
      throw AnalysisError("cannot enumerate aggregate input '" + in.name +
                          "'; the oracle handles scalar inputs only");
    if (const RangeOpt* r = range_for(in.name)) {
      d.add_scalar_range(in.type, r->lo, r->hi);
    } else {
      d.add_scalar_full(in.type);
    }
  }

  OracleConfig cfg;
  cfg.budget = budget;
  CapacityOracle res = oracle_capacity(prog, h, lows, highs, cfg);
  if (res.class_count == 0)
    throw AnalysisError(
        "every execution was blocked by a failed assumption; restrict the "
        "domain with --range");
  const OracleRelation& rel = res.best_rel;
  double bits = channel_capacity(rel.class_count());
  double entropy = shannon_entropy_probs(rel.class_probs());

  std::vector<const HarnessInput*> low_ins;
  for (const auto& in : h.inputs)
    if (in.role == Role::Low) low_ins.push_back(&in);

  if (format_of(o) == ReportFormat::Kv) {
    std::cout << "file=" << o.file << "\n";
    std::cout << "entry=" << h.entry << "\n";
    std::cout << "arch=" << o.arch << "\n";
    std::cout << "classes=" << rel.class_count() << "\n";
    std::cout << "bits=" << detail::bits_str(bits) << "\n";
    std::cout << "entropy=" << detail::bits_str(entropy) << "\n";
    for (size_t i = 0; i < low_ins.size(); ++i)
      std::cout << "best_low_" << low_ins[i]->name << "="
                << scalar_str(low_ins[i]->type, res.best_low[i]) << "\n";
    for (size_t i = 0; i < rel.classes.size(); ++i) {
      std::cout << "class_" << i + 1 << "_members=" << rel.classes[i].members << "\n";
      std::cout << "class_" << i + 1 << "_key=" << hex_key(rel.classes[i].key) << "\n";
    }
    std::cout << "points=" << rel.points << "\n";
    std::cout << "blocked=" << rel.blocked << "\n";
    return 0;
  }

  std::cout << "oracle: classes=" << rel.class_count() << ", "
            << detail::bits_str(bits) << " bits capacity, entropy "
            << detail::bits_str(entropy) << " bits (uniform)\n";
  {
    size_t li = 0;
    for (const auto& in : h.inputs) {
      if (in.role != Role::Low) continue;
      std::cout << "  low " << in.name << " = "
                << scalar_str(in.type, res.best_low[li++]) << "\n";
    }
  }
  for (size_t i = 0; i < rel.classes.size(); ++i) {
    const OracleClass& c = rel.classes[i];
    std::cout << "  class " << i + 1 << ": observation " << hex_key(c.key)
              << ", members " << c.members;
    size_t hi = 0;
    for (const auto& in : h.inputs) {
      if (in.role != Role::High) continue;
      std::cout << (hi == 0 ? ", e.g. " : ", ") << in.name << " = "
                << scalar_str(in.type, c.rep_highs[hi]);
      ++hi;
    }
    std::cout << "\n";
  }
  std::cout << "  points=" << rel.points << " blocked=" << rel.blocked << "\n";
  return 0;
}

int run_export_dimacs(const CommonOpts& o, int policy, const std::string& out_path) {
  Program prog = load_program(o);
  Harness h = harness_for(prog, o);
  CheckConfig cfg = check_config(o);
  detail::Encoded enc = detail::encode_driver(driver_for_policy(prog, h, policy), cfg);

  // single classic BMC instance: SAT = some assert (unwinding or policy) can fail
  BitRef all = enc.policy_assert;
  for (BitRef f : enc.unwinding_facts) all = enc.ssa.circuit.mk_and(all, f);
  CnfInstance cnf = tseitin(enc.ssa.circuit, enc.program_units, {!all});

  if (out_path.empty() || out_path == "-") {
    export_dimacs(cnf, std::cout);
  } else {
    std::ofstream out(out_path);
    if (!out) throw AnalysisError("cannot write '" + out_path + "'");
    export_dimacs(cnf, out);
  }
  return 0;
}

int run_emit_driver(const CommonOpts& o, int policy, const std::string& out_path) {
  Program prog = load_program(o);
  Harness h = harness_for(prog, o);
  DriverProgram dp = driver_for_policy(prog, h, policy);
  if (out_path.empty() || out_path == "-") {
    emit_driver_c(dp, std::cout);
  } else {
    std::ofstream out(out_path);
    if (!out) throw AnalysisError("cannot write '" + out_path + "'");
    emit_driver_c(dp, out);
  }
  return 0;
}

int run_list_builtins(const CommonOpts& o) {
  auto table = builtin_table(o.arch);
  if (format_of(o) == ReportFormat::Kv) {
    for (const auto& b : table) std::cout << b.name << "=" << b.summary << "\n";
    return 0;
  }
  size_t width = 0;
  for (const auto& b : table) width = std::max(width, b.name.size());
  for (const auto& b : table)
    std::cout << b.name << std::string(width - b.name.size() + 2, ' ') << b.summary
              << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantitative information-flow checker for a bit-precise mini-C"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  CommonOpts check_o, cap_o, oracle_o, dimacs_o, emit_o, lb_o;
  int policy = 1, dimacs_policy = 1, emit_policy = 1;
  int n_max = 64;
  std::uint64_t oracle_budget = 1ull << 20;
  std::vector<std::string> oracle_ranges;
  std::string dimacs_out, emit_out;

  CLI::App* check = app.add_subcommand("check", "check an N-distinction policy");
  add_common(check, check_o);
  check->add_option("--policy", policy, "maximum number of distinctions allowed")
      ->required()
      ->check(CLI::PositiveNumber);

  CLI::App* capacity =
      app.add_subcommand("capacity", "find the smallest satisfied policy, in bits");
  add_common(capacity, cap_o);
  capacity->add_option("--n-max", n_max, "largest policy probed")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  CLI::App* oracle =
      app.add_subcommand("oracle", "enumerate observation classes by brute force");
  add_common(oracle, oracle_o);
  oracle->add_option("--range", oracle_ranges,
                     "restrict an input to name=lo..hi (repeatable)");
  oracle->add_option("--oracle-budget", oracle_budget, "max concrete runs")
      ->capture_default_str();

  CLI::App* dimacs = app.add_subcommand("export-dimacs", "dump the CNF instance");
  add_common(dimacs, dimacs_o);
  dimacs->add_option("--policy", dimacs_policy, "policy bound to encode")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  dimacs->add_option("-o,--output", dimacs_out, "output path (default stdout)");

  CLI::App* emit = app.add_subcommand(
      "emit-driver", "write the self-composition driver as standalone C");
  add_common(emit, emit_o);
  emit->add_option("--policy", emit_policy, "policy bound to instantiate")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  emit->add_option("-o,--output", emit_out, "output path (default stdout)");

  CLI::App* builtins = app.add_subcommand("list-builtins", "builtin registry");
  add_common(builtins, lb_o, /*needs_file=*/false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitError;
  }

  try {
    if (check->parsed()) return run_check(check_o, policy);
    if (capacity->parsed()) return run_capacity(cap_o, n_max);
    if (oracle->parsed()) return run_oracle(oracle_o, oracle_ranges, oracle_budget);
    if (dimacs->parsed()) return run_export_dimacs(dimacs_o, dimacs_policy, dimacs_out);
    if (emit->parsed()) return run_emit_driver(emit_o, emit_policy, emit_out);
    if (builtins->parsed()) return run_list_builtins(lb_o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what();
    if (e.loc().line > 0) std::cerr << " (" << loc_str(e.loc()) << ")";
    std::cerr << "\n";
    return kExitError;
  } catch (const InternalError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
