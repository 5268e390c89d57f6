#include "mobprof/profile.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mobprof {

std::vector<Channel> active_channels(MotionMode mode) {
    if (mode == MotionMode::planar) return {Channel::xy, Channel::theta};
    return {Channel::xy, Channel::z, Channel::theta};
}

void MotionProfile::validate() const {
    for (Channel c : kAllChannels) {
        const ChannelProfile& p = (*this)[c];
        if (!(p.pulse_prob >= 0.0 && p.pulse_prob <= 1.0)) {
            throw std::invalid_argument("profile: pulse_prob outside [0,1] on channel " +
                                        std::string(channel_name(c)));
        }
        if (!(p.pulse_var > 0.0) || !std::isfinite(p.pulse_mean)) {
            throw std::invalid_argument("profile: bad slab on channel " +
                                        std::string(channel_name(c)));
        }
    }
}

void ClassHyperParams::validate() const {
    for (Channel c : kAllChannels) {
        const ChannelHyper& h = (*this)[c];
        const bool ok = h.beta_a > 0.0 && h.beta_b > 0.0 && h.gamma_alpha > 0.0 &&
                        h.gamma_beta > 0.0 && h.shrinkage > 0.0 && std::isfinite(h.normal_mean);
        if (!ok) {
            throw std::invalid_argument("class " + std::to_string(class_id) +
                                        ": non-positive hyper-parameter on channel " +
                                        std::string(channel_name(c)));
        }
    }
}

std::vector<ClassHyperParams> reference_classes() {
    struct Row {
        double a, b, alpha, beta, n;
    };
    constexpr std::array<Row, 3> rows{{{2, 50, 10, 10, 1}, {4, 4, 2, 0.5, 2}, {50, 2, 2, 0.1, 10}}};
    std::vector<ClassHyperParams> out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Row& r = rows[i];
        ClassHyperParams h;
        h.class_id = static_cast<int>(i) + 1;
        h[Channel::xy] = {r.a, r.b, r.alpha, r.beta, 1.0, r.n};
        h[Channel::theta] = {r.a, r.b, r.alpha, r.beta, 0.5, r.n};
        h[Channel::z] = {r.a, r.b, r.alpha, r.beta, 0.0, r.n};
        out.push_back(h);
    }
    return out;
}

}  // namespace mobprof
