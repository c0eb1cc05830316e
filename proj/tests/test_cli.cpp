#include "detbound/cli.hpp"
#include "detbound/multicopy.hpp"
#include "detbound/sdp.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <json.hpp>
#include <sstream>

using namespace detbound;
using namespace testing_util;

namespace {

const double kPi = std::acos(-1.0);

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(s);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

// Data lines of a CSV body: manifest and comment lines dropped.
std::vector<std::vector<std::string>> csv_rows(const std::string& body) {
  std::vector<std::vector<std::string>> rows;
  std::stringstream ss(body);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty() || line[0] == '#') continue;
    rows.push_back(split(line, ','));
  }
  return rows;
}

std::string without_manifest(const std::string& body) {
  std::stringstream ss(body), out;
  std::string line;
  while (std::getline(ss, line))
    if (line.rfind("# detbound", 0) != 0) out << line << "\n";
  return out.str();
}

ModelSpec spec(const std::string& text) { return parse_model_spec(text); }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("model spec parsing") {
    ModelSpec s = spec(R"({"name": "dephased_pvm", "fixed": {"theta": 0.5, "phi": 0}, "theta": [0.2], "label": "x"})");
    CHECK(s.name == "dephased_pvm");
    CHECK(s.fixed.at("theta") == 0.5);
    CHECK(s.theta == std::vector<double>{0.2});
    CHECK(s.label == "x");
    CHECK(spec(R"({"name": "bitflip_z", "theta": 0.3})").theta == std::vector<double>{0.3});
  }

  TEST_CASE("spec errors name the line or field") {
    try {
      spec("{\n  \"name\": \"bitflip_z\",\n  \"theta\": [0.2,]\n}");
      FAIL("expected a parse error");
    } catch (const SpecError& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    try {
      spec(R"({"name": "bitflip_z", "colour": 1})");
      FAIL("expected a field error");
    } catch (const SpecError& e) {
      CHECK(std::string(e.what()).find("colour") != std::string::npos);
    }
    try {
      spec(R"({"name": "bitflip_z", "theta": ["a"]})");
      FAIL("expected a field error");
    } catch (const SpecError& e) {
      CHECK(std::string(e.what()).find("theta[0]") != std::string::npos);
    }
    CHECK_THROWS_AS(spec(R"({"theta": [0.2]})"), SpecError);
    CHECK_THROWS_AS(build_model(spec(R"({"name": "nope"})")), SpecError);
    CHECK_THROWS_AS(build_model(spec(R"({"name": "random", "fixed": {"q": 1}})")), SpecError);
    CHECK_THROWS_AS(load_model_spec("/nonexistent/spec.json"), SpecError);
    CHECK_THROWS_AS(parse_format("xml"), SpecError);
  }

  TEST_CASE("random model specs") {
    DetectorModel m = build_model(spec(R"({"name": "random", "fixed": {"d": 3, "m": 4, "seed": 9}})"));
    CHECK(m.dim == 3);
    CHECK(m.outcomes == 4);
    Povm a = m.povm(vec1(0)), b = random_model(3, 4, 9).povm(vec1(0));
    CHECK(max_abs(a[2] - b[2]) == 0);
  }

  TEST_CASE("experiment parsing") {
    ExperimentConfig c = parse_experiment(R"({
      "model": {"name": "dephased_pvm", "fixed": {"theta": 0.3926990816987241}},
      "theta_true": 0.2,
      "probes": {"from": 0.2, "to": 1.0, "count": 33},
      "shots": 1000, "resamples": 10, "seed": 4})");
    CHECK(c.probes.size() == 33);
    CHECK(c.shots == 1000);
    CHECK(c.resamples == 10);
    CHECK(c.seed == 4);
    ExperimentConfig d = parse_experiment(R"({"model": {"name": "bitflip_z", "theta": [0.3]}, "probes": [0.1, [0.5, 1.0]]})");
    CHECK(d.theta_true == 0.3);
    REQUIRE(d.probes.size() == 2);
    CHECK(d.probes[1].phi == 1.0);
    CHECK(d.shots == 100000);
    CHECK(d.resamples == 50);
    CHECK_THROWS_AS(parse_experiment(R"({"model": {"name": "dephased_pvm"}, "theta_true": 0.7, "probes": [0.3]})"),
                    SpecError);
    CHECK_THROWS_AS(parse_experiment(R"({"model": {"name": "bitflip_z"}, "theta_true": 0.2, "probes": [0.3], "shots": 0})"),
                    SpecError);
    CHECK_THROWS_AS(parse_experiment(R"({"model": {"name": "onoff_diagonal"}, "theta_true": 0.2, "probes": [0.3]})"),
                    SpecError);
    CHECK_THROWS_AS(load_experiment(std::string(DETBOUND_TEST_DATA) + "/bad_experiment.json"), SpecError);
    CHECK_NOTHROW(load_experiment(std::string(DETBOUND_TEST_DATA) + "/replica_experiment.json"));
  }

  TEST_CASE("grid and number parsing") {
    auto g = parse_grid("0.1:0.9:9", 1);
    REQUIRE(g.size() == 9);
    CHECK(g[4](0) == doctest::Approx(0.5));
    auto g2 = parse_grid("0.1:0.2:2;0.3:0.4:3", 2);
    REQUIRE(g2.size() == 6);
    CHECK(g2[1](0) == doctest::Approx(0.1));
    CHECK(g2[1](1) == doctest::Approx(0.35));
    CHECK(parse_grid("", 1).empty());
    CHECK_THROWS_AS(parse_grid("0.1:0.2", 1), SpecError);
    CHECK_THROWS_AS(parse_grid("0.1:0.2:3", 2), SpecError);
    CHECK(parse_csv_numbers("0.1, 0.4") == std::vector<double>{0.1, 0.4});
    CHECK_THROWS_AS(parse_csv_numbers("0.1,x"), SpecError);
  }

  TEST_CASE("number formatting") {
    CHECK(fmt9(6.25) == "6.25");
    CHECK(fmt9(1.0 / 3) == "0.333333333");
    CHECK(round9(1.0 / 3) == 0.333333333);
    CHECK(fmt9(std::nan("")) == "nan");
  }

  TEST_CASE("bounds for the bitflip detector") {
    CommandOptions o;
    CommandResult r = cmd_bounds(spec(R"({"name": "bitflip_z", "theta": [0.2]})"), std::nullopt, o);
    CHECK(r.failures.empty());
    auto rows = csv_rows(r.body);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0][3] == "cfi_max");
    CHECK(rows[1][3] == "6.25");
    CHECK(rows[1][4] == "12.5");
    CHECK(rows[1][5] == "6.25");
    CHECK(rows[1][6] == "6.25");
    CHECK(rows[1][7] == "true");
    CHECK(r.body.rfind("# detbound ", 0) == 0);
  }

  TEST_CASE("bounds JSON for the dephased and damped detectors") {
    CommandOptions o;
    o.format = OutputFormat::json;
    auto j = nlohmann::json::parse(
        cmd_bounds(spec(R"({"name": "dephased_pvm", "fixed": {"theta": 0.39269908169872414}, "theta": [0.2]})"),
                   std::nullopt, o)
            .body);
    const auto& rep = j["reports"][0];
    CHECK(rep["j_spectral"].get<double>() == doctest::Approx(0.915291309).epsilon(1e-9));
    CHECK(std::abs(rep["probe_polar"].get<double>() - 0.6042) <= 1e-3);
    CHECK(rep["probe_azimuth"].get<double>() == 0);
    CHECK(rep["attainable"].get<bool>());
    CHECK(rep["ordering_ok"].get<bool>());

    auto a = nlohmann::json::parse(
        cmd_bounds(spec(R"({"name": "amplitude_damped_pvm", "fixed": {"theta": 1.0471975511965976}, "theta": [0.3]})"),
                   std::nullopt, o)
            .body);
    CHECK_FALSE(a["reports"][0]["attainable"].get<bool>());
    CHECK(a["reports"][0]["j_ext"].get<double>() < a["reports"][0]["j_spectral"].get<double>());
  }

  TEST_CASE("bounds for a two-parameter model include the joint bounds") {
    CommandOptions o;
    o.format = OutputFormat::json;
    auto j = nlohmann::json::parse(
        cmd_bounds(spec(R"({"name": "onoff_diagonal", "fixed": {"d": 2}, "theta": [0.1, 0.4]})"), std::nullopt, o).body);
    CHECK(j["reports"].size() == 2);
    CHECK(j["multiparameter"]["qcrb_trace"].get<double>() == doctest::Approx(0.33).epsilon(1e-9));
    CHECK(j["multiparameter"]["qcrb_spectral"].get<double>() == doctest::Approx(0.623938769).epsilon(1e-8));
    CHECK_THROWS_AS(cmd_bounds(spec(R"({"name": "onoff_diagonal", "theta": [0.1]})"), std::nullopt, o), SpecError);
    CHECK_THROWS_AS(cmd_bounds(spec(R"({"name": "bitflip_z"})"), std::nullopt, o), SpecError);
  }

  TEST_CASE("sweep rows reproduce the module values") {
    CommandOptions o;
    CommandResult r = cmd_sweep(spec(R"({"name": "bitflip_z"})"), "0.1:0.9:9", o);
    auto rows = csv_rows(r.body);
    REQUIRE(rows.size() == 10);
    CHECK(rows[0] == std::vector<std::string>{"theta", "status", "j_trace", "j_spectral", "j_ext", "cfi_max"});
    auto model = build_named_model("bitflip_z");
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const double p = std::stod(rows[i][0]);
      CHECK(rows[i][1] == "ok");
      CHECK(std::stod(rows[i][3]) == doctest::Approx(1 / (p * (1 - p))).epsilon(1e-8));
      // Same arithmetic as a direct module call, to the serialised precision.
      Povm povm = model.povm(vec1(p));
      auto d = model.derivatives(vec1(p))[0];
      std::vector<Mat> l{sld_eig(povm[0], d[0]), sld_eig(povm[1], d[1])};
      CHECK(rows[i][2] == fmt9(trace_dqfi(l, povm)));
      CHECK(rows[i][3] == fmt9(spectral_dqfi(l, povm).value));
      CHECK(rows[i][4] == fmt9(extended_dqfi(povm, d).value));
    }
  }

  TEST_CASE("sweep edge cases") {
    CommandOptions o;
    CommandResult e = cmd_sweep(spec(R"({"name": "bitflip_z"})"), "", o);
    auto rows = csv_rows(e.body);
    CHECK(rows.size() == 1);
    CommandResult b = cmd_sweep(spec(R"({"name": "bitflip_z"})"), "0:1:3", o);
    rows = csv_rows(b.body);
    REQUIRE(rows.size() == 4);
    CHECK(rows[1][1] == "divergent");
    CHECK(rows[2][1] == "ok");
    CHECK(rows[3][1] == "divergent");
    CHECK(b.failures.empty());
    CHECK_THROWS_AS(cmd_sweep(spec(R"({"name": "bitflip_z"})"), "0.5:1.5:3", o), SpecError);
  }

  TEST_CASE("two-parameter sweep") {
    CommandOptions o;
    CommandResult r = cmd_sweep(spec(R"({"name": "bitflip_phaseflip_2param"})"), "0.1:0.2:2;0.2:0.3:2", o);
    auto rows = csv_rows(r.body);
    REQUIRE(rows.size() == 5);
    CHECK(rows[0][0] == "theta_0");
    CHECK(rows[0].back() == "ccrb_star");
    const double p1 = std::stod(rows[1][0]), p2 = std::stod(rows[1][1]);
    CHECK(p1 == doctest::Approx(0.1));
    CHECK(p2 == doctest::Approx(0.2));
    const double ctr = 0.25 + p1 * (1 - p1) / 2 + p2 * (1 - p2) / 2;
    CHECK(std::stod(rows[1][7]) == doctest::Approx(ctr).epsilon(1e-8));
    CHECK(std::stod(rows[1][8]) == doctest::Approx(2 * ctr).epsilon(1e-6));
  }

  TEST_CASE("multicopy rows") {
    CommandOptions o;
    auto rows = csv_rows(cmd_multicopy(spec(R"({"name": "heisenberg_k", "fixed": {"k": 2}, "theta": [0.2]})"), 4, o).body);
    REQUIRE(rows.size() == 5);
    for (int n = 1; n <= 4; ++n) {
      CHECK(std::stod(rows[std::size_t(n)][1]) == doctest::Approx(n * 17.0 / 3 + n * n).epsilon(1e-8));
      CHECK(rows[std::size_t(n)][5] == "true");
    }
    auto b = csv_rows(cmd_multicopy(spec(R"({"name": "bitflip_z", "theta": [0.2]})"), 3, o).body);
    for (int n = 1; n <= 3; ++n) CHECK(std::stod(b[std::size_t(n)][1]) == doctest::Approx(6.25 * n).epsilon(1e-12));
    auto bounds = csv_rows(cmd_bounds(spec(R"({"name": "heisenberg_k", "theta": [0.2]})"), std::nullopt, o).body);
    CHECK(rows[1][1] == bounds[1][5]);
    CHECK_THROWS_AS(cmd_multicopy(spec(R"({"name": "bitflip_z", "theta": [0.2]})"), 7, o), DimensionError);
  }

  TEST_CASE("bench") {
    CommandOptions o;
    o.seed = 5;
    CommandResult one = cmd_bench(1, 2, 2, true, o);
    auto rows = csv_rows(one.body);
    REQUIRE(rows.size() == 2);
    auto s = nlohmann::json::parse(one.summary);
    const double jsp = std::stod(rows[1][2]), jext = std::stod(rows[1][3]), jtr = std::stod(rows[1][1]);
    CHECK(s["count"].get<int>() == 1);
    CHECK(s["mean_gap"].get<double>() == doctest::Approx((jsp - jext) / jext).epsilon(1e-6));
    CHECK(s["mean_gap"].get<double>() == s["max_gap"].get<double>());
    CHECK(s["max_ratio_trace_ext"].get<double>() == doctest::Approx(jtr / jext).epsilon(1e-6));
    CHECK(std::stod(rows[1][4]) <= jext * (1 + 1e-6));

    CommandResult a = cmd_bench(40, 2, 2, false, o);
    o.jobs = 3;
    CommandResult b = cmd_bench(40, 2, 2, false, o);
    CHECK(without_manifest(a.body) == without_manifest(b.body));
    auto ra = csv_rows(a.body);
    std::vector<int> ranks;
    for (std::size_t i = 1; i < ra.size(); ++i) ranks.push_back(std::stoi(ra[i][5]));
    std::sort(ranks.begin(), ranks.end());
    for (int i = 0; i < 40; ++i) CHECK(ranks[std::size_t(i)] == i);
    CHECK_THROWS_AS(cmd_bench(0, 2, 2, false, o), SpecError);
  }

  TEST_CASE("simulate output") {
    ExperimentConfig cfg = parse_experiment(R"({
      "model": {"name": "dephased_pvm", "fixed": {"theta": 0.39269908169872414}},
      "theta_true": 0.2, "probes": {"from": 0.2, "to": 1.0, "count": 5}, "shots": 100, "resamples": 5, "seed": 3})");
    CommandOptions o;
    CommandResult a = cmd_simulate(cfg, "smoke", o);
    o.jobs = 2;
    CommandResult b = cmd_simulate(cfg, "smoke", o);
    CHECK(without_manifest(a.body) == without_manifest(b.body));
    auto rows = csv_rows(a.body);
    REQUIRE(rows.size() == 6);
    CHECK(rows[0][0] == "probe_theta");
    CHECK(a.manifest.line().find("command=simulate") != std::string::npos);
    CHECK(a.manifest.line().find("seed=3") != std::string::npos);
  }

  TEST_CASE("failure lists are machine readable") {
    auto j = nlohmann::json::parse(failures_json({{"probe 0", "no information"}}));
    CHECK(j["failures"][0]["item"] == "probe 0");
    CHECK(j["failures"][0]["error"] == "no information");
  }

  TEST_CASE("Bloch angles") {
    Vec psi(2);
    psi << std::cos(0.3), std::polar(std::sin(0.3), 1.2);
    auto [polar, az] = bloch_angles(psi);
    CHECK(polar == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(az == doctest::Approx(1.2).epsilon(1e-12));
    psi << 1, 0;
    CHECK(bloch_angles(psi).second == 0);
    CHECK_FALSE(std::signbit(bloch_angles(psi).second));
    (void)kPi;
  }
}
