#include "drillwave/delay.hpp"

#include "drillwave/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace drillwave {

HistoryBuffer::HistoryBuffer(double max_delay) : max_delay_(max_delay) {
    if (!(max_delay > 0.0) || !std::isfinite(max_delay))
        throw DelayBufferError("history horizon must be positive and finite");
}

void HistoryBuffer::push(double t, double value) {
    if (!times_.empty() && !(t > times_.back()))
        throw DelayBufferError("non-monotone push: t=" + std::to_string(t) +
                               " does not advance past " + std::to_string(times_.back()));
    times_.push_back(t);
    values_.push_back(value);
    maybe_compact();
}

void HistoryBuffer::maybe_compact() {
    // Find the last sample at or before the horizon and drop everything in
    // front of it, so [latest - max_delay, latest] stays fully interpolable.
    const double cutoff = times_.back() - max_delay_;
    std::size_t keep = start_;
    while (keep + 1 < times_.size() && times_[keep + 1] <= cutoff) ++keep;
    start_ = keep;
    // Physically erase only once the dead prefix is large, to keep push O(1)
    // amortized.
    if (start_ > 4096) {
        times_.erase(times_.begin(), times_.begin() + static_cast<std::ptrdiff_t>(start_));
        values_.erase(values_.begin(), values_.begin() + static_cast<std::ptrdiff_t>(start_));
        start_ = 0;
    }
}

double HistoryBuffer::latest_time() const {
    if (times_.empty()) throw DelayBufferError("sample from empty history");
    return times_.back();
}

double HistoryBuffer::oldest_time() const {
    if (times_.empty()) throw DelayBufferError("sample from empty history");
    return times_[start_];
}

double HistoryBuffer::sample(double t) const {
    if (times_.empty()) throw DelayBufferError("sample from empty history");
    const double lo = times_[start_];
    const double hi = times_.back();
    if (t < lo || t > hi)
        throw DelayBufferError("lookup at t=" + std::to_string(t) + " outside covered span [" +
                               std::to_string(lo) + ", " + std::to_string(hi) + "]");
    auto begin = times_.begin() + static_cast<std::ptrdiff_t>(start_);
    auto it = std::lower_bound(begin, times_.end(), t);
    std::size_t idx = static_cast<std::size_t>(it - times_.begin());
    if (idx < times_.size() && times_[idx] == t) return values_[idx];  // exact node hit
    // t lies strictly between idx-1 and idx.
    const double t0 = times_[idx - 1], t1 = times_[idx];
    const double w = (t - t0) / (t1 - t0);
    return values_[idx - 1] + w * (values_[idx] - values_[idx - 1]);
}

HistoryBuffer init_history(const std::function<double(double)>& f, double t_start, double t_end,
                           double dt, double max_delay) {
    if (!(t_end > t_start)) throw DelayBufferError("init_history needs a positive time span");
    if (!(dt > 0.0)) throw DelayBufferError("init_history needs a positive sampling step");
    HistoryBuffer buf(max_delay);
    // Uniform grid hitting both endpoints exactly; rounding keeps the spacing
    // as close to the requested dt as an integer subdivision allows.
    const auto n = static_cast<std::size_t>(std::max(1.0, std::round((t_end - t_start) / dt)));
    for (std::size_t k = 0; k <= n; ++k) {
        const double frac = static_cast<double>(k) / static_cast<double>(n);
        const double t = (k == n) ? t_end : t_start + frac * (t_end - t_start);
        buf.push(t, f(t));
    }
    return buf;
}

} // namespace drillwave
