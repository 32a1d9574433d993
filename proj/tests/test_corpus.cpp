#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "sillsec/json_io.hpp"
#include "sillsec/typecheck.hpp"

using namespace sillsec;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kCorpusDir = std::string(SILLSEC_SOURCE_DIR) + "/corpus/";

}  // namespace

TEST_CASE("corpus counts and marker spans") {
  auto fixtures = corpus::load_corpus();
  CHECK(fixtures.size() == 6);
  int accepting = 0, rejecting = 0;
  for (const auto& fx : fixtures) {
    for (const auto& e : fx.expects) (e.accepts ? accepting : rejecting)++;
  }
  CHECK(accepting >= 7);
  CHECK(rejecting >= 4);

  for (const auto& fx : fixtures)
    for (const auto& e : fx.expects)
      if (!e.accepts) {
        CAPTURE(fx.name);
        CHECK(e.span.line > 0);
        CHECK(e.span.col > 0);
      }
}

TEST_CASE("the marked constraints match the source comments") {
  auto fixtures = corpus::load_corpus();
  auto find = [&](const std::string& name) -> const corpus::Fixture& {
    for (const auto& fx : fixtures)
      if (fx.name == name) return fx;
    FAIL("missing fixture");
    return fixtures[0];
  };
  CHECK(find("leaky_bank").expects[0].constraint == "alice ≠ guest");
  CHECK(find("sneaky_label").expects[0].constraint == "alice ⋢ guest");
  const auto& cut = find("sneaky_cut");
  CHECK(cut.expects.back().constraint == "alice ⋢ guest ⊑ alice");
  CHECK(find("bank").ni.size() == 2);
  CHECK(find("sneaky_label").ni[0].unsafe);
  CHECK(!find("sneaky_label").ni[0].equivalent);
}

TEST_CASE("every fixture expectation matches the toolchain verdict") {
  for (int ntok : {2, 3, 4}) {
    CAPTURE(ntok);
    for (const auto& fx : corpus::load_corpus(ntok)) {
      CAPTURE(fx.name);
      Program p = resolve(parse_program(fx.source));
      auto report = check_program(p);
      for (const auto& exp : fx.expects) {
        const DefReport* got = nullptr;
        for (const auto& r : report)
          if (r.def == exp.def) got = &r;
        REQUIRE(got != nullptr);
        CAPTURE(exp.def);
        if (exp.accepts) {
          CHECK(!got->error);
        } else {
          REQUIRE(got->error.has_value());
          CHECK(to_string(got->error->kind) == exp.kind);
          CHECK(got->error->span == exp.span);
          CHECK(got->error->constraint == exp.constraint);
        }
      }
    }
  }
}

TEST_CASE("checked-in fixture files match the generator") {
  for (const auto& fx : corpus::load_corpus()) {
    CAPTURE(fx.filename);
    CHECK(slurp(kCorpusDir + fx.filename) == fx.source);
  }
  ordered_json manifest = ordered_json::parse(slurp(kCorpusDir + "corpus.json"));
  ordered_json expected = corpus_json(corpus::load_corpus(), 3);
  CHECK(manifest == expected);
  CHECK(manifest["schema"] == 1);
}
