#ifndef SILLSEC_CORPUS_HPP
#define SILLSEC_CORPUS_HPP

#include <optional>
#include <string>
#include <vector>

#include "sillsec/ast.hpp"

namespace sillsec::corpus {

struct Expectation {
  std::string def;
  bool accepts = true;
  Span span;               // failure position for rejecting defs
  std::string kind;        // TypeError kind name
  std::string constraint;  // failed premise, e.g. "alice ⋢ guest"
};

struct NiExpectation {
  std::string entry;
  std::string observer;
  bool equivalent = true;
  bool unsafe = false;  // run with the type check bypassed
};

struct Fixture {
  std::string name;
  std::string filename;
  std::string source;
  std::vector<Expectation> expects;
  std::vector<NiExpectation> ni;
};

namespace detail {

inline Span find_span(const std::string& src, const std::string& marker) {
  size_t pos = src.find(marker);
  if (pos == std::string::npos) return {};
  Span sp{1, 1};
  for (size_t i = 0; i < pos; ++i) {
    if (src[i] == '\n') {
      ++sp.line;
      sp.col = 1;
    } else {
      ++sp.col;
    }
  }
  return sp;
}

inline std::string lattice_text() {
  return "lattice { levels guest, alice, bob, bank;\n"
         "          order guest < alice, alice < bank, guest < bob, bob < bank; }\n";
}

inline std::string auth_type(int ntok) {
  std::string s = "type account = +{ high: 1, med: 1, low: 1 };\n";
  s += "type auth = &{ ";
  for (int i = 1; i <= ntok; ++i) {
    if (i > 1) s += ",\n               ";
    s += "tok" + std::to_string(i) + ": +{ succ: account * 1, fail: 1 }";
  }
  s += " };\n";
  s += "type customer = auth -o 1;\n";
  s += "type rate = &{ lowRate: 1, highRate: 1 };\n";
  s += "type acctsvc = &{ s: account, f: 1 };\n";
  return s;
}

// Customer process for the token `tok`; the account level labels are handled
// uniformly.
inline std::string customer_def(const std::string& name, const std::string& level, int tok) {
  std::string s;
  s += "proc " + name + " [" + level + "] () :: (y: customer) @ " + level + " = {\n";
  s += "  w <- recv y;\n";
  s += "  w.tok" + std::to_string(tok) + ";\n";
  s += "  case w {\n";
  s += "    succ =>\n";
  s += "      v <- recv w;\n";
  s += "      case v {\n";
  s += "        high => wait v; wait w; close y\n";
  s += "      | med => wait v; wait w; close y\n";
  s += "      | low => wait v; wait w; close y\n";
  s += "      }\n";
  s += "  | fail =>\n";
  s += "      wait w;\n";
  s += "      close y\n";
  s += "  }\n";
  s += "}\n";
  return s;
}

inline std::string auth_def(const std::string& name, const std::string& level, int ntok,
                            int good_tok) {
  std::string s;
  s += "proc " + name + " [" + level + "] (u: acctsvc [" + level + "]) :: (x: auth) @ " +
       level + " = {\n";
  s += "  case x {\n";
  for (int i = 1; i <= ntok; ++i) {
    s += (i == 1 ? "    " : "  | ");
    s += "tok" + std::to_string(i) + " => ";
    if (i == good_tok) {
      s += "x.succ; u.s; send u x; close x\n";
    } else {
      s += "x.fail; u.f; wait u; close x\n";
    }
  }
  s += "  }\n";
  s += "}\n";
  return s;
}

inline std::string acc_def(const std::string& name, const std::string& level,
                           const std::string& balance) {
  std::string s;
  s += "proc " + name + " [" + level + "] () :: (u: acctsvc) @ " + level + " = {\n";
  s += "  case u {\n";
  s += "    s => u." + balance + "; close u\n";
  s += "  | f => close u\n";
  s += "  }\n";
  s += "}\n";
  return s;
}

}  // namespace detail

inline std::string bank_source(int ntok = 3) {
  using namespace detail;
  std::string s = "// The banking example programs.\n\n";
  s += lattice_text();
  s += "\n";
  s += auth_type(ntok);
  s += "type sf = &{ s: 1, f: 1 };\n\n";
  s += customer_def("Alice", "alice", 1);
  s += "\n";
  s += auth_def("aAuth", "alice", ntok, 1);
  s += "\n";
  s += acc_def("aAcc", "alice", "high");
  s += "\n";
  s += customer_def("Bob", "bob", 2);
  s += "\n";
  s += auth_def("bAuth", "bob", ntok, 2);
  s += "\n";
  s += acc_def("bAcc", "bob", "med");
  s += "\n";
  s += "proc RateSvc [guest] () :: (u: rate) @ guest = {\n"
       "  case u {\n"
       "    lowRate => close u\n"
       "  | highRate => close u\n"
       "  }\n"
       "}\n\n";
  s += "proc Bank [bank] (x: auth [alice], x': auth [bob], y: customer [alice], "
       "y': customer [bob], u: rate [guest]) :: (z: 1) @ guest = {\n"
       "  send x y;\n"
       "  send x' y';\n"
       "  u.lowRate;\n"
       "  wait y;\n"
       "  wait y';\n"
       "  wait u;\n"
       "  close z\n"
       "}\n\n";
  s += "proc S [alice] (x1: sf [guest]) :: (z1: 1) @ guest = {\n"
       "  x1.s;\n"
       "  wait x1;\n"
       "  close z1\n"
       "}\n\n";
  s += "proc F [alice] (x1: sf [guest]) :: (z1: 1) @ guest = {\n"
       "  x1.f;\n"
       "  wait x1;\n"
       "  close z1\n"
       "}\n\n";
  s += "// Closed driver: assembles the whole bank system with spawns.\n";
  s += "proc BankDemo [bank] () :: (root: 1) @ guest = {\n"
       "  ua <- spawn aAcc() @ alice;\n"
       "  xa <- spawn aAuth(ua) @ alice;\n"
       "  ya <- spawn Alice() @ alice;\n"
       "  ub <- spawn bAcc() @ bob;\n"
       "  xb <- spawn bAuth(ub) @ bob;\n"
       "  yb <- spawn Bob() @ bob;\n"
       "  ur <- spawn RateSvc() @ guest;\n"
       "  z <- spawn Bank(xa, xb, ya, yb, ur) @ guest;\n"
       "  wait z;\n"
       "  close root\n"
       "}\n\n"
       "main BankDemo;\n";
  return s;
}

inline std::string leaky_bank_source(int ntok = 3) {
  using namespace detail;
  std::string s = "// Direct flow: hands the alice authorization channel to a guest.\n\n";
  s += lattice_text();
  s += "\n";
  s += auth_type(ntok);
  s += "\n";
  s += "proc LeakyBank [bank] (x: auth [alice], y: customer [guest]) :: (z: 1) @ guest = {\n"
       "  send x y;\n"
       "  wait y;\n"
       "  close z\n"
       "}\n";
  return s;
}

inline std::string sneaky_label_source(int ntok = 3) {
  using namespace detail;
  std::string s =
      "// Indirect flow: signals authorization success to a guest channel.\n\n";
  s += lattice_text();
  s += "\n";
  s += auth_type(ntok);
  s += "type sf = &{ s: 1, f: 1 };\n\n";
  s += "proc SneakyaAuth [alice] (u: acctsvc [alice], x1: sf [guest]) :: (x: auth) @ alice"
       " = {\n";
  s += "  case x {\n";
  for (int i = 1; i <= ntok; ++i) {
    s += (i == 1 ? "    " : "  | ");
    s += "tok" + std::to_string(i) + " =>\n";
    if (i == 1) {
      s += "      x.succ;\n      u.s;\n      x1.s;\n      send u x;\n      wait x1;\n"
           "      close x\n";
    } else {
      s += "      x.fail;\n      u.f;\n      x1.f;\n      wait u;\n      wait x1;\n"
           "      close x\n";
    }
  }
  s += "  }\n}\n";
  return s;
}

inline std::string sneaky_cut_source(int ntok = 3) {
  using namespace detail;
  std::string s = "// Indirect flow via spawning: S or F records the branch taken.\n\n";
  s += lattice_text();
  s += "\n";
  s += auth_type(ntok);
  s += "type sf = &{ s: 1, f: 1 };\n\n";
  s += "proc S [alice] (x1: sf [guest]) :: (z1: 1) @ guest = {\n"
       "  x1.s;\n  wait x1;\n  close z1\n}\n\n";
  s += "proc F [alice] (x1: sf [guest]) :: (z1: 1) @ guest = {\n"
       "  x1.f;\n  wait x1;\n  close z1\n}\n\n";
  s += "proc SneakyaAuth [alice] (u: acctsvc [alice], x1: sf [guest]) :: (x: auth) @ alice"
       " = {\n";
  s += "  case x {\n";
  for (int i = 1; i <= ntok; ++i) {
    s += (i == 1 ? "    " : "  | ");
    s += "tok" + std::to_string(i) + " =>\n";
    if (i == 1) {
      s += "      x.succ;\n      u.s;\n      z1 <- spawn S(x1) @ guest;\n"
           "      send u x;\n      wait z1;\n      close x\n";
    } else {
      s += "      x.fail;\n      u.f;\n      z1 <- spawn F(x1) @ guest;\n"
           "      wait u;\n      wait z1;\n      close x\n";
    }
  }
  s += "  }\n}\n";
  return s;
}

inline std::string indirect_send_source(int ntok = 3) {
  using namespace detail;
  std::string s = "// Indirect flow: forwards the received token to a guest channel.\n\n";
  s += lattice_text();
  s += "\n";
  s += auth_type(ntok);
  s += "type toksink = &{ ";
  for (int i = 1; i <= ntok; ++i) {
    if (i > 1) s += ", ";
    s += "tok" + std::to_string(i) + ": 1";
  }
  s += " };\n\n";
  s += "proc SneakyaAuth [alice] (u: acctsvc [alice], x1: toksink [guest]) :: (x: auth)"
       " @ alice = {\n";
  s += "  case x {\n";
  for (int i = 1; i <= ntok; ++i) {
    std::string tok = "tok" + std::to_string(i);
    s += (i == 1 ? "    " : "  | ");
    s += tok + " =>\n";
    if (i == 1) {
      s += "      x.succ;\n      u.s;\n      x1." + tok +
           ";\n      send u x;\n      wait x1;\n      close x\n";
    } else {
      s += "      x.fail;\n      u.f;\n      x1." + tok +
           ";\n      wait u;\n      wait x1;\n      close x\n";
    }
  }
  s += "  }\n}\n";
  return s;
}

inline std::string indirect_cut_source(int ntok = 3) {
  using namespace detail;
  std::string s =
      "// Indirect flow via spawning: each S_i records the token choice.\n\n";
  s += lattice_text();
  s += "\n";
  s += auth_type(ntok);
  s += "type toksink = &{ ";
  for (int i = 1; i <= ntok; ++i) {
    if (i > 1) s += ", ";
    s += "tok" + std::to_string(i) + ": 1";
  }
  s += " };\n";
  s += "type sftok = &{ s: toksink, f: 1 };\n\n";
  for (int i = 1; i <= ntok; ++i) {
    std::string n = std::to_string(i);
    s += "proc S" + n + " [alice] (x1: sftok [guest]) :: (z1: 1) @ guest = {\n" +
         "  x1.s;\n  x1.tok" + n + ";\n  wait x1;\n  close z1\n}\n\n";
  }
  s += "proc F [alice] (x1: sftok [guest]) :: (z1: 1) @ guest = {\n"
       "  x1.f;\n  wait x1;\n  close z1\n}\n\n";
  s += "proc SneakyaAuth [alice] (u: acctsvc [alice], x1: sftok [guest]) :: (x: auth)"
       " @ alice = {\n";
  s += "  case x {\n";
  for (int i = 1; i <= ntok; ++i) {
    s += (i == 1 ? "    " : "  | ");
    s += "tok" + std::to_string(i) + " =>\n";
    if (i == 1) {
      s += "      x.succ;\n      u.s;\n      z1 <- spawn S1(x1) @ guest;\n"
           "      send u x;\n      wait z1;\n      close x\n";
    } else {
      s += "      x.fail;\n      u.f;\n      z1 <- spawn F(x1) @ guest;\n"
           "      wait u;\n      wait z1;\n      close x\n";
    }
  }
  s += "  }\n}\n";
  return s;
}

inline std::vector<Fixture> load_corpus(int ntok = 3) {
  using detail::find_span;
  std::vector<Fixture> out;

  Fixture bank{"bank", "bank.slz", bank_source(ntok), {}, {}};
  for (const char* d : {"Alice", "aAuth", "aAcc", "Bob", "bAuth", "bAcc", "RateSvc",
                        "Bank", "S", "F", "BankDemo"})
    bank.expects.push_back({d, true, {}, "", ""});
  bank.ni.push_back({"Bank", "guest", true, false});
  bank.ni.push_back({"Bank", "bob", true, false});
  out.push_back(std::move(bank));

  Fixture leaky{"leaky_bank", "leaky_bank.slz", leaky_bank_source(ntok), {}, {}};
  leaky.expects.push_back({"LeakyBank", false, find_span(leaky.source, "send x y;"),
                           "SecrecyFlowViolation", "alice ≠ guest"});
  out.push_back(std::move(leaky));

  Fixture slabel{"sneaky_label", "sneaky_label.slz", sneaky_label_source(ntok), {}, {}};
  slabel.expects.push_back({"SneakyaAuth", false, find_span(slabel.source, "x1.s;"),
                            "SecrecyFlowViolation", "alice ⋢ guest"});
  slabel.ni.push_back({"SneakyaAuth", "guest", false, true});
  out.push_back(std::move(slabel));

  Fixture scut{"sneaky_cut", "sneaky_cut.slz", sneaky_cut_source(ntok), {}, {}};
  scut.expects.push_back({"S", true, {}, "", ""});
  scut.expects.push_back({"F", true, {}, "", ""});
  scut.expects.push_back({"SneakyaAuth", false,
                          find_span(scut.source, "z1 <- spawn S(x1) @ guest;"),
                          "SecrecyFlowViolation", "alice ⋢ guest ⊑ alice"});
  out.push_back(std::move(scut));

  Fixture isend{"indirect_send", "indirect_send.slz", indirect_send_source(ntok), {}, {}};
  isend.expects.push_back({"SneakyaAuth", false, find_span(isend.source, "x1.tok1;"),
                           "SecrecyFlowViolation", "alice ⋢ guest"});
  out.push_back(std::move(isend));

  Fixture icut{"indirect_cut", "indirect_cut.slz", indirect_cut_source(ntok), {}, {}};
  for (int i = 1; i <= ntok; ++i)
    icut.expects.push_back({"S" + std::to_string(i), true, {}, "", ""});
  icut.expects.push_back({"F", true, {}, "", ""});
  icut.expects.push_back({"SneakyaAuth", false,
                          find_span(icut.source, "z1 <- spawn S1(x1) @ guest;"),
                          "SecrecyFlowViolation", "alice ⋢ guest ⊑ alice"});
  out.push_back(std::move(icut));

  return out;
}

}  // namespace sillsec::corpus

#endif
