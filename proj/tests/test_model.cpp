#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "coopdet/error.hpp"
#include "coopdet/model.hpp"
#include "coopdet/reference_designs.hpp"
#include "coopdet/steady_state.hpp"

using namespace coopdet;
using doctest::Approx;

namespace {

DetectorSpec one_bin(double weight, double dispersion, std::optional<int> k) {
    DetectorSpec s;
    s.band_lo = 1.9;
    s.band_hi = 2.9;
    s.gamma_sq = 0.01;
    s.bins.push_back({2.4, weight, 0.05, dispersion, k});
    return s;
}

DetectorSpec random_spec(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    DetectorSpec s;
    s.band_lo = 1.9;
    s.band_hi = 2.9;
    s.gamma_sq = 1e-3 * (1.0 + 9.0 * u(rng));
    const int n = 1 + static_cast<int>(u(rng) * 8);
    for (int i = 0; i < n; ++i) {
        BinSpec b;
        b.center = 1.9 + (i + 0.5) / n;
        b.weight = 100.0 * u(rng);
        b.gamma_cap_sq = 0.02 + 0.1 * u(rng);
        b.dispersion = u(rng) < 0.5 ? 0.0 : 0.09 * u(rng);
        if (u(rng) < 0.5) b.subdivisions = 1 + static_cast<int>(u(rng) * 9);
        s.bins.push_back(b);
    }
    if (u(rng) < 0.5) s.endcaps = {{1.81, 50.0 * u(rng)}, {2.99, 50.0 * u(rng)}};
    return s;
}

}  // namespace

TEST_CASE("zero dispersion collapses a bin to one element") {
    const auto m = compile_detector(one_bin(3.0, 0.0, std::nullopt));
    REQUIRE(m.size() == 1);
    CHECK(m.elements[0].energy == 2.4);
    CHECK(m.elements[0].weight == 3.0);
    CHECK(m.elements[0].channel == 0);
    CHECK(m.num_channels == 1);
}

TEST_CASE("dispersed bin uses midpoints of equal subintervals") {
    const auto m = compile_detector(one_bin(3.0, 0.09, 3));
    REQUIRE(m.size() == 3);
    // (2.355, 2.445) split in three has midpoints 2.370, 2.400, 2.430
    CHECK(m.elements[0].energy == Approx(2.370).epsilon(1e-12));
    CHECK(m.elements[1].energy == Approx(2.400).epsilon(1e-12));
    CHECK(m.elements[2].energy == Approx(2.430).epsilon(1e-12));
    for (const auto& e : m.elements) {
        CHECK(e.weight == Approx(1.0).epsilon(1e-14));
        CHECK(e.channel == 0);
    }
}

TEST_CASE("capped reference design has twelve channels and two unmonitored elements") {
    const auto m = compile_detector(reference_capped());
    CHECK(m.num_channels == 12);
    REQUIRE(m.size() == 14);
    int unmonitored = 0;
    for (const auto& e : m.elements)
        if (e.channel == kNoChannel) {
            ++unmonitored;
            CHECK(e.decay_sq == 0.0);
        }
    CHECK(unmonitored == 2);
    CHECK(m.elements[12].energy == 1.81);
    CHECK(m.elements[13].energy == 2.99);
}

TEST_CASE("validate_spec reports each violation by field") {
    CHECK(validate_spec(reference_uncapped()).empty());

    auto s = reference_uncapped();
    s.bins[11].center = 3.1;
    CHECK(validate_spec(s) == std::vector<std::string>{"bin 11: center outside band"});

    s = reference_uncapped();
    s.bins[0].weight = -1.0;
    CHECK(validate_spec(s) == std::vector<std::string>{"bin 0: negative weight"});

    s = reference_capped();
    s.endcaps[0].energy = 2.0;
    CHECK(validate_spec(s) == std::vector<std::string>{"endcap 0: energy inside band"});

    s = reference_uncapped();
    std::swap(s.bins[3], s.bins[4]);
    CHECK(validate_spec(s) == std::vector<std::string>{"bin 4: centers not strictly increasing"});

    s = reference_uncapped();
    s.band_lo = 3.0;
    s.chi = -1.0;
    s.bins[2].dispersion = -0.1;
    s.bins[2].subdivisions = 0;
    const auto v = validate_spec(s);
    CHECK(std::find(v.begin(), v.end(), "band: band_lo must be below band_hi") != v.end());
    CHECK(std::find(v.begin(), v.end(), "chi: must be finite and non-negative") != v.end());
    CHECK(std::find(v.begin(), v.end(), "bin 2: negative dispersion") != v.end());
    CHECK(std::find(v.begin(), v.end(), "bin 2: subdivisions must be at least 1") != v.end());

    s = reference_uncapped();
    s.bins.clear();
    CHECK(validate_spec(s) == std::vector<std::string>{"bins: at least one bin is required"});
}

TEST_CASE("compile rejects invalid specs with the violation list") {
    auto s = reference_uncapped();
    s.bins[0].weight = -1.0;
    try {
        compile_detector(s);
        FAIL("expected SpecError");
    } catch (const SpecError& e) {
        CHECK(e.violations() == std::vector<std::string>{"bin 0: negative weight"});
    }
}

TEST_CASE("default subdivisions keep spacing at most a quarter of the slowest rate") {
    BinSpec b{2.4, 1.0, 0.02, 0.0886, std::nullopt};
    const int k = effective_subdivisions(b, 0.00585);
    CHECK(k == 61);
    CHECK(b.dispersion / k <= 0.00585 / 4.0);
    CHECK(b.dispersion / (k - 1) > 0.00585 / 4.0);
    b.dispersion = 0.0;
    b.subdivisions = 7;
    CHECK(effective_subdivisions(b, 0.01) == 1);
}

TEST_CASE("property: total weight is conserved exactly per bin") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const auto spec = random_spec(rng);
        const auto m = compile_detector(spec);
        std::vector<double> per_bin(spec.bins.size(), 0.0);
        for (const auto& e : m.elements)
            if (e.channel != kNoChannel) per_bin[static_cast<std::size_t>(e.channel)] += e.weight;
        for (std::size_t i = 0; i < spec.bins.size(); ++i) CHECK(per_bin[i] == spec.bins[i].weight);
        double expected = 0.0;
        for (const auto& b : spec.bins) expected += b.weight;
        for (const auto& c : spec.endcaps) expected += c.weight;
        CHECK(m.total_weight() == Approx(expected).epsilon(1e-14));
    }
}

TEST_CASE("property: compilation is deterministic and survives a JSON round trip") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        const auto spec = random_spec(rng);
        const auto a = compile_detector(spec);
        const auto b = compile_detector(spec_from_json(nlohmann::json::parse(spec_to_json(spec).dump())));
        REQUIRE(a.size() == b.size());
        for (std::size_t j = 0; j < a.size(); ++j) {
            CHECK(a.elements[j].energy == b.elements[j].energy);
            CHECK(a.elements[j].weight == b.elements[j].weight);
            CHECK(a.elements[j].decay_sq == b.elements[j].decay_sq);
            CHECK(a.elements[j].channel == b.elements[j].channel);
        }
    }
}

TEST_CASE("property: doubling subdivisions moves channel probabilities by less than 2e-3") {
    // Default rule: spacing <= Gamma^2 / 4. Doubling K halves the spacing.
    auto spec = reference_dispersed(0.0886, 0.00585);
    for (auto& b : spec.bins) b.weight = 60.0;
    const auto base = compile_detector(spec);
    const int k = effective_subdivisions(spec.bins[0], spec.min_decay());
    for (auto& b : spec.bins) b.subdivisions = 2 * k;
    const auto fine = compile_detector(spec);
    double worst = 0.0;
    for (int s = 0; s <= 200; ++s) {
        const double w = 1.9 + s * 0.005;
        const auto a = channel_probabilities(base, w);
        const auto c = channel_probabilities(fine, w);
        for (std::size_t i = 0; i < a.pi.size(); ++i) worst = std::max(worst, std::abs(a.pi[i] - c.pi[i]));
    }
    MESSAGE("max |dPi| under K doubling: " << worst);
    CHECK(worst < 2e-3);
}

TEST_CASE("spec JSON rejects unknown and missing keys by name") {
    auto doc = spec_to_json(reference_uncapped());
    doc["bins"][3]["colour"] = "red";
    try {
        spec_from_json(doc);
        FAIL("expected SpecError");
    } catch (const SpecError& e) {
        CHECK(e.key() == "bins[3].colour");
    }

    doc = spec_to_json(reference_uncapped());
    doc.erase("gamma_sq");
    try {
        spec_from_json(doc);
        FAIL("expected SpecError");
    } catch (const SpecError& e) {
        CHECK(e.key() == "gamma_sq");
    }

    doc = spec_to_json(reference_uncapped());
    doc["bins"][0]["subdivisions"] = nullptr;
    CHECK_FALSE(spec_from_json(doc).bins[0].subdivisions.has_value());
    doc["bins"][0]["subdivisions"] = 2.5;
    CHECK_THROWS_AS(spec_from_json(doc), SpecError);
}

TEST_CASE("load_spec reports malformed files") {
    const std::string path = "model_test_malformed.json";
    std::ofstream(path) << "{ \"band_lo\": 1.9, ";
    try {
        load_spec(path);
        FAIL("expected SpecError");
    } catch (const SpecError& e) {
        CHECK(e.key() == "spec_path");
    }
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_spec("does/not/exist.json"), SpecError);
}
