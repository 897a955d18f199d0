#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <mutex>
#include <random>
#include <string>

namespace evolve {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

std::int64_t to_epoch_ms(Timestamp t);
Timestamp from_epoch_ms(std::int64_t ms);
std::string to_iso8601(Timestamp t);

class Clock {
public:
    virtual ~Clock() = default;
    virtual Timestamp now() const = 0;
};

class SystemClock final : public Clock {
public:
    Timestamp now() const override;
};

/// Test clock; time moves only when advanced.
class ManualClock final : public Clock {
public:
    explicit ManualClock(Timestamp start = from_epoch_ms(1'767'225'600'000))  // 2026-01-01T00:00Z
        : now_ms_(to_epoch_ms(start)) {}

    Timestamp now() const override { return from_epoch_ms(now_ms_.load()); }
    void advance(std::chrono::milliseconds d) { now_ms_ += d.count(); }
    void set(Timestamp t) { now_ms_ = to_epoch_ms(t); }

private:
    std::atomic<std::int64_t> now_ms_;
};

/// Produces RFC 4122 version-4 UUID strings. Seeded instances are reproducible.
class IdSource {
public:
    IdSource();
    explicit IdSource(std::uint64_t seed);

    std::string next();

private:
    std::mutex mu_;
    std::mt19937_64 rng_;
};

}  // namespace evolve
