#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include <json.hpp>

namespace p2pvc {

enum class Interpolation { Linear, Step };
enum class ProfileUnit { Watts, PerUnit };

struct ProfileSample {
    double time_s = 0.0;
    double value = 0.0;

    friend bool operator==(const ProfileSample&, const ProfileSample&) = default;
};

/// Time series sampled at strictly increasing times.
struct Profile {
    std::vector<ProfileSample> samples;
    Interpolation interpolation = Interpolation::Linear;
    ProfileUnit unit = ProfileUnit::Watts;

    /// Throws Error(EmptyProfile) or Error(InvalidScenario).
    void validate() const;
};

/// Linear: affine between bracketing samples. Step: value of the last sample
/// at or before t. Queries outside the sampled range clamp to the endpoints.
double interpolate_profile(const Profile& profile, double t);

/// Reads a `time_s,value` CSV with header.
Profile load_profile_csv(const std::filesystem::path& path, Interpolation interpolation,
                         ProfileUnit unit);

/// Seeded generator composed of additive primitives sampled on a uniform
/// grid (start_s, start_s + step_s, ..., end_s):
///   {"type": "constant", "value"}
///   {"type": "square", "t_on", "t_off", "value"}            value on [t_on, t_off)
///   {"type": "ramp", "t0", "t1", "v0", "v1"}                linear on [t0, t1], 0 outside
///   {"type": "piecewise", "points": [[t, v], ...]}          linear, clamped at the ends
///   {"type": "noise", "sigma"}                              i.i.d. Gaussian per sample
///   {"type": "pulses", "rate_per_hour", "duration_s", "value"}  random rectangular events
/// After summation the value is clamped to [clamp_min, clamp_max].
struct SyntheticSpec {
    double start_s = 0.0;
    double end_s = 0.0;
    double step_s = 60.0;
    std::uint64_t seed = 0;
    double clamp_min = -1e300;
    double clamp_max = 1e300;
    nlohmann::json components = nlohmann::json::array();
};

SyntheticSpec parse_synthetic(const nlohmann::json& j);
Profile generate_profile(const SyntheticSpec& spec, Interpolation interpolation, ProfileUnit unit);

}  // namespace p2pvc
