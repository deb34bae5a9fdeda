#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dyson/astro/kepler.hpp"
#include "dyson/astro/ring.hpp"

namespace dyson {

struct Dsm {
    Epoch epoch;
    Vec3 r = Vec3::Zero();   // km
    Vec3 dv = Vec3::Zero();  // km/s
};

/// One transfer leg ending in a flyby of `target`. `v_depart` is the
/// heliocentric velocity right after leaving the previous body, `v_arrive`
/// right before `dv1`. `dv1` is applied before the flyby and `dv2` after it
/// (towards the next leg; zero on the last leg).
struct ChainLeg {
    std::int64_t target = 0;
    Epoch encounter;
    Vec3 dv1 = Vec3::Zero();
    Vec3 dv2 = Vec3::Zero();
    std::optional<Dsm> dsm;
    Vec3 v_depart = Vec3::Zero();
    Vec3 v_arrive = Vec3::Zero();

    int impulse_count_into() const { return (dsm ? 1 : 0) + (dv1.norm() > 0.0 ? 1 : 0); }
};

struct MothershipChain {
    int ship = 1;
    Epoch launch_epoch;
    Vec3 launch_impulse = Vec3::Zero();
    std::vector<ChainLeg> legs;

    std::vector<std::int64_t> ids() const {
        std::vector<std::int64_t> out;
        for (const auto& l : legs) out.push_back(l.target);
        return out;
    }
    std::vector<Epoch> epochs() const {
        std::vector<Epoch> out;
        for (const auto& l : legs) out.push_back(l.encounter);
        return out;
    }
};

/// Mothership cost: all impulses plus the launch excess above the free cap.
inline double chain_dv(const MothershipChain& ch, const Constants& c = default_constants()) {
    double dv = std::max(0.0, ch.launch_impulse.norm() - c.v_launch_max);
    for (const auto& l : ch.legs) {
        dv += l.dv1.norm() + l.dv2.norm();
        if (l.dsm) dv += l.dsm->dv.norm();
    }
    return dv;
}

}  // namespace dyson
