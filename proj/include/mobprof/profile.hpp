#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

namespace mobprof {

/// Lower bound on any pulse variance, in channel units squared.
inline constexpr double kVarianceFloor = 1e-9;

enum class Channel : std::size_t { xy = 0, z = 1, theta = 2 };

inline constexpr std::array<Channel, 3> kAllChannels{Channel::xy, Channel::z, Channel::theta};

constexpr std::string_view channel_name(Channel c) {
    switch (c) {
        case Channel::xy: return "xy";
        case Channel::z: return "z";
        case Channel::theta: return "theta";
    }
    return "?";
}

/// Planar motion keeps v_z = 0 and disables the vertical channel.
enum class MotionMode { planar, spatial };

std::vector<Channel> active_channels(MotionMode mode);

/// Spike-and-slab parameters of one force channel.
struct ChannelProfile {
    double pulse_prob = 0.0;
    double pulse_mean = 0.0;
    double pulse_var = kVarianceFloor;
};

/// Per-object motion profile: one spike-and-slab triple per channel.
struct MotionProfile {
    std::array<ChannelProfile, 3> channels{};
    int object_id = 0;

    ChannelProfile& operator[](Channel c) { return channels[static_cast<std::size_t>(c)]; }
    const ChannelProfile& operator[](Channel c) const {
        return channels[static_cast<std::size_t>(c)];
    }

    /// Throws std::invalid_argument if a probability leaves [0,1] or a
    /// variance is not positive.
    void validate() const;
};

/// Conjugate hyper-prior for one channel: lambda ~ Beta(a, b),
/// tau = 1/sigma^2 ~ Gamma(alpha, beta) (shape/rate), mu ~ N(mean, sigma^2/n).
struct ChannelHyper {
    double beta_a = 1.0;
    double beta_b = 1.0;
    double gamma_alpha = 1.0;
    double gamma_beta = 1.0;
    double normal_mean = 0.0;
    double shrinkage = 1.0;
};

struct ClassHyperParams {
    std::array<ChannelHyper, 3> channels{};
    int class_id = 0;

    ChannelHyper& operator[](Channel c) { return channels[static_cast<std::size_t>(c)]; }
    const ChannelHyper& operator[](Channel c) const {
        return channels[static_cast<std::size_t>(c)];
    }

    void validate() const;
};

/// The three reference classes used throughout the simulations. Speed and
/// direction channels carry the published Beta/Gamma/shrinkage values; the
/// slab means are 1.0 (xy) and 0.5 (theta). The vertical channel mirrors the
/// speed channel with a zero mean.
std::vector<ClassHyperParams> reference_classes();

}  // namespace mobprof
