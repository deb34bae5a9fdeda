#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dyson/astro/kepler.hpp"
#include "dyson/core/error.hpp"
#include "dyson/core/rng.hpp"

namespace dyson {

struct AsteroidRecord {
    std::int64_t id = 0;
    KeplerianElements elements;
    double m0 = 0.0;  // kg
};

class Catalog {
public:
    Catalog() = default;
    Catalog(std::vector<AsteroidRecord> records, std::string source)
        : records_(std::move(records)), source_(std::move(source)) {
        index_.reserve(records_.size());
        for (std::size_t i = 0; i < records_.size(); ++i) {
            if (!index_.emplace(records_[i].id, i).second)
                throw InputError("duplicate asteroid id " + std::to_string(records_[i].id));
            if (!(records_[i].m0 > 0.0))
                throw InputError("asteroid " + std::to_string(records_[i].id) + " has non-positive mass");
        }
    }

    const std::vector<AsteroidRecord>& records() const { return records_; }
    const std::string& source() const { return source_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    const AsteroidRecord& operator[](std::size_t i) const { return records_[i]; }
    auto begin() const { return records_.begin(); }
    auto end() const { return records_.end(); }

    const AsteroidRecord* find(std::int64_t id) const {
        const auto it = index_.find(id);
        return it == index_.end() ? nullptr : &records_[it->second];
    }
    const AsteroidRecord& at(std::int64_t id) const {
        const auto* r = find(id);
        if (!r) throw InputError("unknown asteroid id " + std::to_string(id));
        return *r;
    }
    std::size_t index_of(std::int64_t id) const {
        const auto it = index_.find(id);
        if (it == index_.end()) throw InputError("unknown asteroid id " + std::to_string(id));
        return it->second;
    }

private:
    std::vector<AsteroidRecord> records_;
    std::string source_;
    std::unordered_map<std::int64_t, std::size_t> index_;
};

namespace detail {
inline bool parse_number(std::string_view tok, double& out) {
    const auto* b = tok.data();
    const auto* e = b + tok.size();
    if (!tok.empty() && *b == '+') ++b;
    const auto res = std::from_chars(b, e, out);
    return res.ec == std::errc() && res.ptr == e;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        const std::size_t j = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > j) out.push_back(line.substr(j, i - j));
    }
    return out;
}
}  // namespace detail

/// Parses catalog text: '#' comments, then columns
/// `id epoch_mjd a_au e i_deg raan_deg argp_deg M_deg mass_kg`.
/// A leading column-title line starting with "id" is skipped.
inline Catalog parse_catalog(std::istream& in, const std::string& source = "stream") {
    std::vector<AsteroidRecord> recs;
    std::unordered_map<std::int64_t, std::size_t> seen;
    std::string line;
    std::size_t lineno = 0;
    bool first_data = true;
    while (std::getline(in, line)) {
        ++lineno;
        const auto toks = detail::split_ws(line);
        if (toks.empty() || toks[0].front() == '#') continue;
        if (first_data) {
            first_data = false;
            std::string head(toks[0]);
            std::transform(head.begin(), head.end(), head.begin(), ::tolower);
            if (head == "id") continue;
        }
        if (toks.size() != 9)
            throw ParseError("expected 9 columns, found " + std::to_string(toks.size()), lineno);
        double v[9];
        for (int c = 0; c < 9; ++c)
            if (!detail::parse_number(toks[c], v[c]) || !std::isfinite(v[c]))
                throw ParseError("bad number '" + std::string(toks[c]) + "' in column " + std::to_string(c + 1), lineno);
        if (v[0] != std::floor(v[0])) throw ParseError("id must be an integer", lineno);
        AsteroidRecord r;
        r.id = static_cast<std::int64_t>(v[0]);
        r.elements.ref_epoch = Epoch(v[1]);
        r.elements.a = v[2];
        r.elements.e = v[3];
        r.elements.i = v[4] * kDeg;
        r.elements.raan = v[5] * kDeg;
        r.elements.argp = v[6] * kDeg;
        r.elements.M0 = v[7] * kDeg;
        r.m0 = v[8];
        try {
            check_elements(r.elements);
        } catch (const InputError& e) {
            throw ParseError(e.what(), lineno);
        }
        if (!(r.m0 > 0.0)) throw ParseError("mass must be positive", lineno);
        if (!seen.emplace(r.id, lineno).second)
            throw ParseError("duplicate asteroid id " + std::to_string(r.id) + " (first seen on line " +
                                 std::to_string(seen[r.id]) + ")",
                             lineno);
        recs.push_back(r);
    }
    if (recs.empty()) throw InputError("empty catalog");
    return Catalog(std::move(recs), source);
}

inline Catalog load_catalog(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open catalog " + path);
    return parse_catalog(in, path);
}

inline void write_catalog(std::ostream& out, const Catalog& cat) {
    out << "# id epoch_mjd a_au e i_deg raan_deg argp_deg M_deg mass_kg\n";
    char buf[512];
    for (const auto& r : cat) {
        const auto& el = r.elements;
        std::snprintf(buf, sizeof buf, "%lld %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n",
                      static_cast<long long>(r.id), el.ref_epoch.mjd, el.a, el.e, el.i / kDeg, el.raan / kDeg,
                      el.argp / kDeg, el.M0 / kDeg, r.m0);
        out << buf;
    }
}

inline void save_catalog(const std::string& path, const Catalog& cat) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write catalog " + path);
    write_catalog(out, cat);
}

struct PruneBounds {
    double a_max = 2.8;           // AU
    double e_max = 0.1584;
    double i_max = 8.897 * kDeg;  // rad
    double m_min = 5.8497e13;     // kg
};

/// Keeps records inside the closed bounds, preserving order.
inline Catalog prune(const Catalog& cat, const PruneBounds& b = {}) {
    std::vector<AsteroidRecord> keep;
    for (const auto& r : cat)
        if (r.elements.a <= b.a_max && r.elements.e <= b.e_max && r.elements.i <= b.i_max && r.m0 >= b.m_min)
            keep.push_back(r);
    return Catalog(std::move(keep), cat.source());
}

struct SynthRanges {
    double a_lo = 0.8, a_hi = 2.8;
    double e_lo = 0.0, e_hi = 0.1584;
    double i_lo = 0.0, i_hi = 8.897 * kDeg;
    double m_lo = 5.8497e13, m_hi = 1e16;  // log-uniform
    double epoch_mjd = 95739.0;
};

/// Deterministic synthetic catalog with ids 1..n.
inline Catalog synth_catalog(std::size_t n, std::uint64_t seed, const SynthRanges& g = {}) {
    if (n == 0) throw InputError("synth_catalog: n must be at least 1");
    auto bad = [](double lo, double hi) { return !std::isfinite(lo) || !std::isfinite(hi) || lo > hi; };
    if (bad(g.a_lo, g.a_hi) || bad(g.e_lo, g.e_hi) || bad(g.i_lo, g.i_hi) || bad(g.m_lo, g.m_hi) ||
        !(g.a_lo > 0.0) || g.e_lo < 0.0 || !(g.e_hi < 1.0) || g.i_lo < 0.0 || g.i_hi > kPi || !(g.m_lo > 0.0))
        throw InputError("synth_catalog: degenerate ranges");
    Rng rng(seed);
    std::vector<AsteroidRecord> recs;
    recs.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        AsteroidRecord r;
        r.id = static_cast<std::int64_t>(k + 1);
        r.elements.a = rng.uniform(g.a_lo, g.a_hi);
        r.elements.e = rng.uniform(g.e_lo, g.e_hi);
        r.elements.i = rng.uniform(g.i_lo, g.i_hi);
        r.elements.raan = rng.uniform(0.0, kTwoPi);
        r.elements.argp = rng.uniform(0.0, kTwoPi);
        r.elements.M0 = rng.uniform(0.0, kTwoPi);
        r.elements.ref_epoch = Epoch(g.epoch_mjd);
        r.m0 = std::exp(rng.uniform(std::log(g.m_lo), std::log(g.m_hi)));
        recs.push_back(r);
    }
    return Catalog(std::move(recs), "synth:" + std::to_string(seed));
}

struct EarthModel {
    KeplerianElements elements{1.0, 0.0167, 0.0, 0.0, 0.0, 0.0, Epoch(95739.0)};
};

inline CartesianState earth_state(Epoch t, const EarthModel& m = {}, const Constants& c = default_constants()) {
    return propagate_kepler(m.elements, t, c);
}

}  // namespace dyson
