#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace drillwave {

// Append-only record of a scalar signal, sampled at strictly increasing
// times, with linear interpolation in between.  Used for the delayed terms
// y(t - omega) and v(t - 2*omega) in the control loop.
//
// Samples older than (latest - max_delay) may be evicted, but eviction always
// keeps one sample at or beyond the horizon so the oldest admissible lookup
// time stays interpolable.  Lookups outside the covered span throw
// DelayBufferError -- silent extrapolation would corrupt the delayed
// feedback without any visible symptom.
class HistoryBuffer {
public:
    explicit HistoryBuffer(double max_delay);

    // Appends (t, value); t must exceed the latest stored time.
    void push(double t, double value);

    // Linear interpolation at t in [oldest, latest]; exact at sample times.
    double sample(double t) const;

    double latest_time() const;
    double oldest_time() const;
    std::size_t size() const { return times_.size() - start_; }
    double max_delay() const { return max_delay_; }

private:
    void maybe_compact();

    double max_delay_;
    std::size_t start_ = 0;  // logical front; physical erase happens in batches
    std::vector<double> times_;
    std::vector<double> values_;
};

// Pre-populates a buffer with f sampled uniformly on [t_start, t_end]
// (both endpoints included, spacing ~dt).  The controller uses this to seed
// the delayed signals on the startup window before any dynamics ran.
HistoryBuffer init_history(const std::function<double(double)>& f, double t_start, double t_end,
                           double dt, double max_delay);

} // namespace drillwave
