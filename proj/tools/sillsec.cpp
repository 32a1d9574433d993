#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "sillsec/configtype.hpp"
#include "sillsec/json_io.hpp"
#include "sillsec/security.hpp"

using namespace sillsec;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitReportedFailure = 1;  // type errors / inequivalence
constexpr int kExitLoadError = 2;        // I/O, syntax, resolution, closings
constexpr int kExitBudget = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::shared_ptr<const Program> load(const std::string& path) {
  return std::make_shared<Program>(resolve(parse_program(read_file(path))));
}

long step_budget(long flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("SILLSEC_STEP_BUDGET")) return std::atol(env);
  return kDefaultStepBudget;
}

Scheduler parse_scheduler(const std::string& s) {
  if (s == "leftmost") return Scheduler::leftmost();
  if (s == "rightmost") return Scheduler::rightmost();
  if (s.rfind("random", 0) == 0) {
    uint64_t seed = 0;
    // both random:7 and random(7)
    if (auto pos = s.find_first_of(":("); pos != std::string::npos)
      seed = std::stoull(s.substr(pos + 1));
    return Scheduler::random(seed);
  }
  throw LoadError("unknown scheduler '" + s + "' (leftmost|rightmost|random:<seed>)");
}

int cmd_check(const std::string& path, bool json) {
  auto prog = load(path);
  auto report = check_program(*prog);
  if (json) {
    std::cout << report_json(report).dump(2) << "\n";
  } else {
    for (const auto& r : report) {
      if (!r.error) {
        std::cout << r.def << ": accepted\n";
      } else {
        std::cout << r.def << ": rejected at " << to_string(r.error->span) << " ["
                  << to_string(r.error->kind) << "] " << r.error->constraint << "\n";
      }
    }
  }
  for (const auto& r : report)
    if (r.error) return kExitReportedFailure;
  return kExitOk;
}

int cmd_run(const std::string& path, const std::string& entry_flag, bool verify,
            const std::string& sched, bool json, long budget, bool unsafe) {
  auto prog = load(path);
  std::string entry = entry_flag;
  if (entry.empty() && prog->main) entry = *prog->main;
  if (entry.empty()) throw LoadError("no --entry given and the program has no main");

  Configuration c = boot(prog, entry, /*enforce_typing=*/!unsafe);
  Configuration before = c;
  RunResult run;
  try {
    run = run_to_poised(std::move(c), parse_scheduler(sched), budget);
  } catch (const StepBudgetExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBudget;
  }

  int violations = 0;
  if (verify) {
    Configuration cur = before;
    for (const auto& rec : run.trace) {
      StepChoice choice{rec.node, rec.rule, rec.chan};
      Configuration next = step(cur, choice);
      auto rep = check_preservation(cur, next);
      if (!rep.ok()) {
        ++violations;
        std::cerr << "preservation violation at step " << rec.step << ": " << rep.detail
                  << "\n";
      }
      cur = std::move(next);
    }
  }

  bool closed = run.config.nodes.empty() ||
                (run.config.nodes.size() == 1 &&
                 run.config.nodes[0].term->kind == TermKind::Close);
  if (json) {
    std::cout << ordered_json{{"schema", kSchemaVersion},
                              {"kind", "run"},
                              {"entry", entry},
                              {"steps", run.trace.size()}}
                     .dump()
              << "\n";
    for (const auto& rec : run.trace) std::cout << to_json(rec).dump() << "\n";
    ordered_json fin{{"kind", "result"},
                     {"poised", is_poised(run.config)},
                     {"closed", closed},
                     {"nodes", run.config.nodes.size()}};
    if (verify) fin["preservation_violations"] = violations;
    std::cout << fin.dump() << "\n";
  } else {
    for (const auto& rec : run.trace) {
      std::cout << rec.step << ": " << to_string(rec.rule) << " on " << to_string(rec.chan);
      if (!rec.payload.empty()) std::cout << " (" << rec.payload << ")";
      std::cout << "\n";
    }
    std::cout << (closed ? "terminated: final close message\n"
                         : "poised at the interface after " +
                               std::to_string(run.trace.size()) + " steps\n");
    if (verify)
      std::cout << "preservation violations: " << violations << "\n";
  }
  return violations == 0 ? kExitOk : kExitReportedFailure;
}

int cmd_ni(const std::string& path, const std::string& entry, const std::string& observer,
           bool unsafe, bool json, long budget) {
  auto prog = load(path);
  NiOptions opts;
  opts.unsafe = unsafe;
  opts.budget = budget;
  NiReport rep = ni_check(prog, entry, observer, opts);
  if (json) {
    std::cout << verdict_json(rep).dump(2) << "\n";
  } else {
    std::cout << "closings: " << rep.closings << ", pairs: " << rep.pairs
              << ", equivalent: " << rep.equivalent << " (inputs diverged on "
              << rep.inputs_diverged << "), inequivalent: " << rep.inequivalent << "\n";
    if (rep.counterexample) {
      const auto& cx = *rep.counterexample;
      std::cout << "counterexample pair (" << cx.first << ", " << cx.second
                << "), diverges at event " << cx.divergence_index << ":\n";
      std::cout << "  q1:";
      for (const auto& e : cx.q1) std::cout << " [" << to_string(e) << "]";
      std::cout << "\n  q2:";
      for (const auto& e : cx.q2) std::cout << " [" << to_string(e) << "]";
      std::cout << "\n";
    }
    std::cout << (rep.all_equivalent() ? "verdict: equivalent\n"
                                       : "verdict: inequivalent\n");
  }
  return rep.all_equivalent() ? kExitOk : kExitReportedFailure;
}

int cmd_corpus(const std::string& emit_dir, int ntok, bool json, bool with_ni,
               long budget) {
  auto fixtures = corpus::load_corpus(ntok);
  if (!emit_dir.empty()) {
    for (const auto& fx : fixtures) {
      std::ofstream out(emit_dir + "/" + fx.filename, std::ios::binary);
      if (!out) throw LoadError("cannot write to '" + emit_dir + "'");
      out << fx.source;
    }
    std::ofstream manifest(emit_dir + "/corpus.json", std::ios::binary);
    manifest << corpus_json(fixtures, ntok).dump(2) << "\n";
    std::cout << "wrote " << fixtures.size() << " fixtures to " << emit_dir << "\n";
    return kExitOk;
  }

  int failures = 0;
  ordered_json results = ordered_json::array();
  for (const auto& fx : fixtures) {
    auto prog = std::make_shared<Program>(resolve(parse_program(fx.source)));
    auto report = check_program(*prog);
    for (const auto& exp : fx.expects) {
      const DefReport* got = nullptr;
      for (const auto& r : report)
        if (r.def == exp.def) got = &r;
      bool ok = got != nullptr;
      std::string detail;
      if (ok && exp.accepts) {
        ok = !got->error;
        if (!ok) detail = "unexpectedly rejected: " + got->error->constraint;
      } else if (ok) {
        ok = got->error && to_string(got->error->kind) == exp.kind &&
             got->error->span == exp.span && got->error->constraint == exp.constraint;
        if (!ok)
          detail = got->error ? "wrong rejection: " + got->error->constraint + " at " +
                                    to_string(got->error->span)
                              : "unexpectedly accepted";
      }
      failures += !ok;
      if (json) {
        results.push_back(ordered_json{{"file", fx.filename},
                                       {"def", exp.def},
                                       {"ok", ok},
                                       {"detail", detail}});
      } else {
        std::cout << (ok ? "ok   " : "FAIL ") << fx.filename << " :: " << exp.def;
        if (!detail.empty()) std::cout << " — " << detail;
        std::cout << "\n";
      }
    }
    if (!with_ni) continue;
    for (const auto& ni : fx.ni) {
      NiOptions opts;
      opts.unsafe = ni.unsafe;
      opts.budget = budget;
      NiReport rep = ni_check(prog, ni.entry, ni.observer, opts);
      bool ok = rep.all_equivalent() == ni.equivalent;
      failures += !ok;
      if (json) {
        results.push_back(ordered_json{{"file", fx.filename},
                                       {"ni", ni.entry},
                                       {"observer", ni.observer},
                                       {"ok", ok}});
      } else {
        std::cout << (ok ? "ok   " : "FAIL ") << fx.filename << " :: ni " << ni.entry
                  << " @ " << ni.observer << " -> "
                  << (rep.all_equivalent() ? "equivalent" : "inequivalent") << "\n";
      }
    }
  }
  if (json)
    std::cout << ordered_json{{"schema", kSchemaVersion},
                              {"ntok", ntok},
                              {"failures", failures},
                              {"results", std::move(results)}}
                     .dump(2)
              << "\n";
  else
    std::cout << (failures == 0 ? "corpus: all expectations hold\n"
                                : "corpus: " + std::to_string(failures) + " failure(s)\n");
  return failures == 0 ? kExitOk : kExitReportedFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sillsec: session-typed information flow control toolchain"};
  app.require_subcommand(1);

  std::string path, entry, observer;
  std::string sched = "leftmost";
  bool json = false, verify = false, unsafe = false, no_ni = false;
  long budget = 0;
  std::string emit_dir;
  int ntok = 3;

  auto* check = app.add_subcommand("check", "Type-check every definition in a program");
  check->add_option("file", path)->required();
  check->add_flag("--json", json);

  auto* run = app.add_subcommand("run", "Run a definition to a poised configuration");
  run->add_option("file", path)->required();
  run->add_option("--entry", entry, "Entry definition (defaults to main)");
  run->add_flag("--verify", verify, "Check preservation on every step");
  run->add_option("--scheduler", sched, "leftmost|rightmost|random:<seed>");
  run->add_flag("--json", json);
  run->add_flag("--unsafe", unsafe, "Skip type checking the entry");
  run->add_option("--budget", budget, "Step budget (or SILLSEC_STEP_BUDGET)");

  auto* ni = app.add_subcommand("ni", "Exhaustive noninterference check");
  ni->add_option("file", path)->required();
  ni->add_option("--entry", entry)->required();
  ni->add_option("--observer", observer)->required();
  ni->add_flag("--unsafe", unsafe, "Skip type checking the entry (differential mode)");
  ni->add_flag("--json", json);
  ni->add_option("--budget", budget);

  auto* corpus_cmd = app.add_subcommand("corpus", "Run the bundled example expectations");
  corpus_cmd->add_option("--emit", emit_dir, "Write fixture files and manifest here");
  corpus_cmd->add_option("--ntok", ntok, "Authorization token count");
  corpus_cmd->add_flag("--no-ni", no_ni, "Skip the noninterference expectations");
  corpus_cmd->add_flag("--json", json);

  CLI11_PARSE(app, argc, argv);

  try {
    long b = step_budget(budget);
    if (check->parsed()) return cmd_check(path, json);
    if (run->parsed()) return cmd_run(path, entry, verify, sched, json, b, unsafe);
    if (ni->parsed()) return cmd_ni(path, entry, observer, unsafe, json, b);
    if (corpus_cmd->parsed()) return cmd_corpus(emit_dir, ntok, json, !no_ni, b);
  } catch (const StepBudgetExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBudget;
  } catch (const LoadError& e) {
    std::cerr << "error: " << e.what();
    if (e.span().line > 0) std::cerr << " at " << to_string(e.span());
    std::cerr << "\n";
    return kExitLoadError;
  } catch (const ClosingIllTyped& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitLoadError;
  } catch (const IllTyped& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitLoadError;
  } catch (const RuntimeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitLoadError;
  }
  return kExitOk;
}
