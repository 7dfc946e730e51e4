// model.hpp: detector specification and its compiled single-excitation grid
//
// A detector is a set of frequency bins (subsystems), each a group of
// near-degenerate absorbers sharing one amplifier channel, plus optional
// unmonitored endcap groups outside the detection band. Every absorber couples
// to the same guided mode with rate gamma_sq, which produces the collective
// (rank-one) interaction that all solvers exploit.
//
// Energies and rates are in eV; time is measured in hbar/eV.

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace coopdet {

struct BinSpec {
    double center = 0.0;        // subsystem frequency (eV)
    double weight = 0.0;        // effective element count, continuous
    double gamma_cap_sq = 0.0;  // incoherent decay rate into the dark state (eV)
    double dispersion = 0.0;    // flat spread of element detunings (eV)
    std::optional<int> subdivisions;  // sub-elements for the spread; default rule if empty
};

struct Endcap {
    double energy = 0.0;
    double weight = 0.0;
};

struct DetectorSpec {
    double band_lo = 0.0;
    double band_hi = 0.0;
    std::vector<BinSpec> bins;
    double gamma_sq = 0.0;  // optical coupling per element (eV)
    double chi = 0.0;       // amplifier measurement rate; never changes results
    std::vector<Endcap> endcaps;

    std::vector<double> bin_centers() const;
    // Smallest positive incoherent rate over bins, 0 if there is none.
    double min_decay() const;
};

inline constexpr int kNoChannel = -1;

struct Element {
    double energy = 0.0;
    double weight = 0.0;    // w_j; the collective coupling of the entry is w_j * gamma_sq
    double decay_sq = 0.0;  // Gamma_j^2, zero for endcaps
    int channel = kNoChannel;
    int group = 0;          // design group: bins first, then endcaps
    double group_fraction = 1.0;  // w_j / (weight of its group)
};

struct CompiledModel {
    std::vector<Element> elements;
    double gamma_sq = 0.0;
    double chi = 0.0;
    int num_channels = 0;
    int num_groups = 0;
    std::vector<double> channel_centers;

    std::size_t size() const noexcept { return elements.size(); }
    double total_weight() const noexcept;
    double min_decay() const noexcept;
};

// Every violated invariant, one "<field>: <rule>" string each. Empty means valid.
std::vector<std::string> validate_spec(const DetectorSpec& spec);

// Number of sub-elements used for a bin: the explicit value if given, else the
// smallest K whose sub-element spacing is at most min_decay / 4.
int effective_subdivisions(const BinSpec& bin, double min_decay);

// Throws SpecError listing all violations.
CompiledModel compile_detector(const DetectorSpec& spec);

// Key-for-key mapping of DetectorSpec/BinSpec; unknown or missing keys throw
// SpecError naming the key.
DetectorSpec spec_from_json(const nlohmann::json& doc);
nlohmann::json spec_to_json(const DetectorSpec& spec);
DetectorSpec load_spec(const std::string& path);

}  // namespace coopdet
