#include <fstream>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "coopdet/error.hpp"
#include "coopdet/model.hpp"

namespace coopdet {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::string& where,
                    std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw SpecError(where, "expected a JSON object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : obj.items()) {
        if (!ok.count(key)) {
            const std::string path = where.empty() ? key : where + "." + key;
            throw SpecError(path, "unknown key");
        }
    }
}

double number(const json& obj, const std::string& where, const char* key) {
    const std::string path = where.empty() ? key : where + "." + key;
    auto it = obj.find(key);
    if (it == obj.end()) throw SpecError(path, "missing required key");
    if (!it->is_number()) throw SpecError(path, "expected a number");
    return it->get<double>();
}

double number_or(const json& obj, const char* key, double fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    return number(obj, where, key);
}

}  // namespace

DetectorSpec spec_from_json(const json& doc) {
    reject_unknown(doc, "", {"band_lo", "band_hi", "bins", "gamma_sq", "chi", "endcaps"});
    DetectorSpec spec;
    spec.band_lo = number(doc, "", "band_lo");
    spec.band_hi = number(doc, "", "band_hi");
    spec.gamma_sq = number(doc, "", "gamma_sq");
    spec.chi = number_or(doc, "chi", 0.0, "");

    if (!doc.contains("bins") || !doc["bins"].is_array())
        throw SpecError("bins", "expected an array of bins");
    const auto& bins = doc["bins"];
    for (std::size_t i = 0; i < bins.size(); ++i) {
        const std::string where = "bins[" + std::to_string(i) + "]";
        const auto& b = bins[i];
        reject_unknown(b, where,
                       {"center", "weight", "gamma_cap_sq", "dispersion", "subdivisions"});
        BinSpec bin;
        bin.center = number(b, where, "center");
        bin.weight = number(b, where, "weight");
        bin.gamma_cap_sq = number(b, where, "gamma_cap_sq");
        bin.dispersion = number_or(b, "dispersion", 0.0, where);
        if (b.contains("subdivisions") && !b["subdivisions"].is_null()) {
            if (!b["subdivisions"].is_number_integer())
                throw SpecError(where + ".subdivisions", "expected an integer");
            bin.subdivisions = b["subdivisions"].get<int>();
        }
        spec.bins.push_back(bin);
    }

    if (doc.contains("endcaps")) {
        const auto& caps = doc["endcaps"];
        if (!caps.is_array()) throw SpecError("endcaps", "expected an array");
        for (std::size_t k = 0; k < caps.size(); ++k) {
            const std::string where = "endcaps[" + std::to_string(k) + "]";
            reject_unknown(caps[k], where, {"energy", "weight"});
            spec.endcaps.push_back({number(caps[k], where, "energy"), number(caps[k], where, "weight")});
        }
    }
    return spec;
}

json spec_to_json(const DetectorSpec& spec) {
    json bins = json::array();
    for (const auto& b : spec.bins) {
        json jb = {{"center", b.center},
                   {"weight", b.weight},
                   {"gamma_cap_sq", b.gamma_cap_sq},
                   {"dispersion", b.dispersion}};
        if (b.subdivisions) jb["subdivisions"] = *b.subdivisions;
        bins.push_back(std::move(jb));
    }
    json caps = json::array();
    for (const auto& c : spec.endcaps) caps.push_back({{"energy", c.energy}, {"weight", c.weight}});
    return {{"band_lo", spec.band_lo}, {"band_hi", spec.band_hi}, {"bins", std::move(bins)},
            {"gamma_sq", spec.gamma_sq},   {"chi", spec.chi},         {"endcaps", std::move(caps)}};
}

DetectorSpec load_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SpecError("spec_path", "cannot open " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw SpecError("spec_path", std::string("malformed JSON in ") + path + ": " + e.what());
    }
    return spec_from_json(doc);
}

}  // namespace coopdet
