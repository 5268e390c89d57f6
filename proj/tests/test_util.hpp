#pragma once

#include <cmath>
#include <vector>

// Sample mean and unbiased variance.
struct SampleStats {
    double mean = 0.0;
    double var = 0.0;
    double n = 0.0;

    double se() const { return std::sqrt(var / n); }
};

inline SampleStats sample_stats(const std::vector<double>& x) {
    SampleStats s;
    s.n = static_cast<double>(x.size());
    for (double v : x) s.mean += v;
    s.mean /= s.n;
    for (double v : x) s.var += (v - s.mean) * (v - s.mean);
    s.var /= s.n - 1.0;
    return s;
}
