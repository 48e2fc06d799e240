#include "p2pvc/profile.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "p2pvc/error.hpp"
#include "p2pvc/rng.hpp"

namespace p2pvc {

void Profile::validate() const {
    if (samples.empty()) throw Error(ErrorKind::EmptyProfile, "profile has no samples");
    if (interpolation == Interpolation::Linear && samples.size() < 2) {
        throw Error(ErrorKind::InvalidScenario, "linear profile needs at least two samples");
    }
    for (std::size_t i = 1; i < samples.size(); ++i) {
        if (!(samples[i].time_s > samples[i - 1].time_s)) {
            throw Error(ErrorKind::InvalidScenario, "profile times must be strictly increasing");
        }
    }
    for (const auto& s : samples) {
        if (!std::isfinite(s.time_s) || !std::isfinite(s.value)) {
            throw Error(ErrorKind::InvalidScenario, "profile contains non-finite values");
        }
    }
}

double interpolate_profile(const Profile& profile, double t) {
    const auto& s = profile.samples;
    if (s.empty()) throw Error(ErrorKind::EmptyProfile, "profile has no samples");
    if (t <= s.front().time_s) return s.front().value;
    if (t >= s.back().time_s) return s.back().value;
    // First sample strictly after t.
    auto hi = std::upper_bound(s.begin(), s.end(), t,
                               [](double v, const ProfileSample& p) { return v < p.time_s; });
    auto lo = hi - 1;
    if (profile.interpolation == Interpolation::Step || lo->time_s == t) return lo->value;
    const double w = (t - lo->time_s) / (hi->time_s - lo->time_s);
    return lo->value + w * (hi->value - lo->value);
}

Profile load_profile_csv(const std::filesystem::path& path, Interpolation interpolation,
                         ProfileUnit unit) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open profile " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::EmptyProfile, path.string() + " is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "time_s,value") {
        throw Error(ErrorKind::InvalidScenario,
                    path.string() + ": expected header 'time_s,value', got '" + line + "'");
    }
    Profile profile;
    profile.interpolation = interpolation;
    profile.unit = unit;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw Error(ErrorKind::InvalidScenario,
                        path.string() + ":" + std::to_string(lineno) + ": expected two fields");
        }
        try {
            std::size_t used = 0;
            const double t = std::stod(line.substr(0, comma), &used);
            const std::string rest = line.substr(comma + 1);
            const double v = std::stod(rest, &used);
            if (used != rest.size() && rest.find_first_not_of(" \t", used) != std::string::npos) {
                throw std::invalid_argument("trailing characters");
            }
            profile.samples.push_back({t, v});
        } catch (const std::logic_error&) {
            throw Error(ErrorKind::InvalidScenario,
                        path.string() + ":" + std::to_string(lineno) + ": malformed number");
        }
    }
    profile.validate();
    return profile;
}

SyntheticSpec parse_synthetic(const nlohmann::json& j) {
    SyntheticSpec spec;
    try {
        spec.start_s = j.at("start_s").get<double>();
        spec.end_s = j.at("end_s").get<double>();
        spec.step_s = j.value("step_s", 60.0);
        spec.seed = j.value("seed", std::uint64_t{0});
        spec.clamp_min = j.value("clamp_min", -1e300);
        spec.clamp_max = j.value("clamp_max", 1e300);
        spec.components = j.value("components", nlohmann::json::array());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidScenario, std::string("synthetic profile: ") + e.what());
    }
    if (!(spec.step_s > 0.0) || !(spec.end_s >= spec.start_s)) {
        throw Error(ErrorKind::InvalidScenario, "synthetic profile: bad time grid");
    }
    return spec;
}

Profile generate_profile(const SyntheticSpec& spec, Interpolation interpolation, ProfileUnit unit) {
    const auto count = static_cast<std::size_t>(std::floor((spec.end_s - spec.start_s) / spec.step_s + 1e-9)) + 1;
    Profile profile;
    profile.interpolation = interpolation;
    profile.unit = unit;
    profile.samples.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        profile.samples[i] = {spec.start_s + static_cast<double>(i) * spec.step_s, 0.0};
    }

    std::uint64_t stream = 0;
    for (const auto& c : spec.components) {
        const auto type = c.at("type").get<std::string>();
        Rng rng(derive_seed(spec.seed, stream++));
        if (type == "constant") {
            const double v = c.at("value").get<double>();
            for (auto& s : profile.samples) s.value += v;
        } else if (type == "square") {
            const double on = c.at("t_on").get<double>();
            const double off = c.at("t_off").get<double>();
            const double v = c.at("value").get<double>();
            for (auto& s : profile.samples) {
                if (s.time_s >= on && s.time_s < off) s.value += v;
            }
        } else if (type == "ramp") {
            const double t0 = c.at("t0").get<double>();
            const double t1 = c.at("t1").get<double>();
            const double v0 = c.at("v0").get<double>();
            const double v1 = c.at("v1").get<double>();
            for (auto& s : profile.samples) {
                if (s.time_s < t0 || s.time_s > t1) continue;
                s.value += t1 > t0 ? v0 + (v1 - v0) * (s.time_s - t0) / (t1 - t0) : v0;
            }
        } else if (type == "piecewise") {
            Profile shape;
            for (const auto& p : c.at("points")) shape.samples.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
            shape.validate();
            for (auto& s : profile.samples) s.value += interpolate_profile(shape, s.time_s);
        } else if (type == "noise") {
            const double sigma = c.at("sigma").get<double>();
            for (auto& s : profile.samples) s.value += sigma * rng.normal();
        } else if (type == "pulses") {
            const double rate = c.at("rate_per_hour").get<double>() / 3600.0;
            const double duration = c.at("duration_s").get<double>();
            const double v = c.at("value").get<double>();
            const double window_start = c.value("t_on", spec.start_s);
            const double window_end = c.value("t_off", spec.end_s);
            // Poisson arrivals via exponential gaps.
            double t = window_start;
            while (rate > 0.0) {
                t += -std::log(1.0 - rng.uniform()) / rate;
                if (t >= window_end) break;
                for (auto& s : profile.samples) {
                    if (s.time_s >= t && s.time_s < t + duration) s.value += v;
                }
            }
        } else {
            throw Error(ErrorKind::InvalidScenario, "unknown synthetic component '" + type + "'");
        }
    }
    for (auto& s : profile.samples) s.value = std::clamp(s.value, spec.clamp_min, spec.clamp_max);
    profile.validate();
    return profile;
}

}  // namespace p2pvc
