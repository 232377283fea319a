#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "qamatch/config.hpp"
#include "qamatch/error.hpp"

using namespace qamatch;

namespace {

KeyValues parse(const std::string& text) {
  std::istringstream in(text);
  return parse_key_values(in);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const ParameterError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("documented defaults") {
    const TrainConfig c;
    CHECK(c.temperature == 0.5);
    CHECK(c.alpha == 0.75);
    CHECK(c.beta == 0.9999);
    CHECK(c.window == 128);
    CHECK(c.rebalance);
    CHECK(c.calibration);
    CHECK(c.softmix);
    CHECK(c.anchor);
    CHECK(c.use_unlabeled);
    CHECK_NOTHROW(c.validate());
  }

  TEST_CASE("key = value parsing") {
    const auto kv = parse("# comment\n\n  beta = 0.99  \nhidden=32, 16\n\talpha =1\n");
    REQUIRE(kv.size() == 3);
    CHECK(kv[0] == std::pair<std::string, std::string>{"beta", "0.99"});
    CHECK(kv[1].second == "32, 16");
    CHECK(kv[2].first == "alpha");
    CHECK(error_of("beta = 1\nbeta = 2\n").find("line 2") != std::string::npos);
    CHECK(error_of("beta = 1\njust words\n").find("line 2") != std::string::npos);
    CHECK(error_of("= 3\n").find("line 1") != std::string::npos);
  }

  TEST_CASE("unknown keys and bad values name the key") {
    TrainConfig c;
    try {
      set_option(c, "betta", "0.5");
      FAIL("expected an error");
    } catch (const ParameterError& e) {
      CHECK(std::string(e.what()).find("betta") != std::string::npos);
    }
    CHECK_THROWS_AS(set_option(c, "window", "-3"), ParameterError);
    CHECK_THROWS_AS(set_option(c, "beta", "0.5x"), ParameterError);
    CHECK_THROWS_AS(set_option(c, "softmix", "maybe"), ParameterError);
    SynthConfig s;
    CHECK_THROWS_AS(set_option(s, "profile", "flat"), ParameterError);
  }

  TEST_CASE("validation names the offending field") {
    TrainConfig c;
    c.beta = 1.0;
    try {
      c.validate();
      FAIL("expected an error");
    } catch (const ParameterError& e) {
      CHECK(std::string(e.what()).find("beta") != std::string::npos);
    }
    c = TrainConfig{};
    c.temperature = 0.0;
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c = TrainConfig{};
    c.window = 0;
    CHECK_THROWS_AS(c.validate(), ParameterError);
  }

  TEST_CASE("entries round trip through text") {
    TrainConfig c;
    c.temperature = 0.1 + 0.2;
    c.hidden = {32, 16};
    c.anchor = false;
    c.scale_m = 1.0 / 3.0;
    c.seed = 18446744073709551615ull;
    TrainConfig back;
    qamatch::apply(back, parse(format_key_values(entries(c))));
    const bool same = entries(back) == entries(c);
    CHECK(same);
    CHECK(back.temperature == c.temperature);
    CHECK(back.scale_m == c.scale_m);

    SynthConfig s;
    s.separation = 2.25;
    s.class_names = {"a", "b", "c"};
    SynthConfig sback;
    qamatch::apply(sback, parse(format_key_values(entries(s))));
    const bool synth_same = entries(sback) == entries(s);
    CHECK(synth_same);
  }

  TEST_CASE("later sources override earlier ones field by field") {
    TrainConfig c;
    qamatch::apply(c, parse("beta = 0.9\ntemperature = 0.25\n"));
    set_option(c, "beta", "0.5");
    CHECK(c.beta == 0.5);
    CHECK(c.temperature == 0.25);
    CHECK(c.alpha == 0.75);
  }

  TEST_CASE("preset is applied before explicit synth keys") {
    SynthConfig s;
    qamatch::apply(s, parse("seed = 9\npreset = agnews-shape\n"));
    CHECK(s.seed == 9);
    CHECK(s.classes == 4);
    CHECK_THROWS_AS(set_option(s, "preset", "nonexistent"), ParameterError);
  }

  TEST_CASE("format_double is shortest round trip") {
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(0.9999) == "0.9999");
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
  }

  TEST_CASE("shipped acceptance config parses and validates") {
    TrainConfig c;
    qamatch::apply(c, load_key_values(QAMATCH_CONFIG_DIR "/longtail-3.train.conf"));
    CHECK_NOTHROW(c.validate());
    CHECK(c.normalize_weights);
    CHECK(c.temperature == 0.5);
  }
}
