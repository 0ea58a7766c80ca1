// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

#include "sculpt/core/json.hpp"

namespace sculpt {

struct StreamRequest {
    std::uint64_t seq = 0;
    std::string instance;
    Json payload;
};

/// Outbound message: the revision a solve produced and every request sequence
/// number it answers (the solved one plus the ones it superseded).
struct StreamFrame {
    std::uint64_t index = 0;
    long revision = 0;
    std::string instance;
    std::vector<std::uint64_t> acks;
    std::string error;
    std::string geometry;
};

/// Latest-wins request queue for interactive deformation. While a request for
/// an instance waits, a newer one for the same instance replaces it; the
/// replaced one is acknowledged by the frame of the solve that superseded it.
class Coalescer {
public:
    using Solver = std::function<StreamFrame(const StreamRequest&)>;

    struct Stats {
        std::uint64_t submitted = 0;
        std::uint64_t solves = 0;
        std::uint64_t dropped = 0;
    };

    /// With `manual`, nothing runs until `run_once` is called.
    Coalescer(Solver solve, bool manual) : solve_(std::move(solve)) {
        if (!manual) worker_ = std::thread([this] { work(); });
    }

    ~Coalescer() {
        {
            std::lock_guard lock(mutex_);
            stop_ = true;
        }
        wake_.notify_all();
        if (worker_.joinable()) worker_.join();
    }

    Coalescer(const Coalescer&) = delete;
    Coalescer& operator=(const Coalescer&) = delete;

    std::uint64_t submit(std::string instance, Json payload) {
        std::uint64_t seq;
        {
            std::lock_guard lock(mutex_);
            seq = ++stats_.submitted;
            auto it = pending_.find(instance);
            if (it == pending_.end()) {
                order_.push_back(instance);
                pending_.emplace(instance, Pending{{seq, instance, std::move(payload)}, {}});
            } else {
                it->second.superseded.push_back(it->second.latest.seq);
                it->second.latest = {seq, std::move(instance), std::move(payload)};
                ++stats_.dropped;
            }
        }
        wake_.notify_all();
        return seq;
    }

    /// Solves the oldest waiting instance's latest request. False when idle.
    bool run_once() {
        Pending job;
        {
            std::lock_guard lock(mutex_);
            if (order_.empty()) return false;
            const auto it = pending_.find(order_.front());
            job = std::move(it->second);
            pending_.erase(it);
            order_.pop_front();
            busy_ = true;
        }
        StreamFrame frame = solve_(job.latest);
        frame.instance = job.latest.instance;
        frame.acks = std::move(job.superseded);
        frame.acks.push_back(job.latest.seq);
        {
            std::lock_guard lock(mutex_);
            frame.index = ++frame_count_;
            frames_.push_back(std::move(frame));
            while (frames_.size() > kKeptFrames) frames_.pop_front();
            ++stats_.solves;
            busy_ = false;
        }
        wake_.notify_all();
        return true;
    }

    /// First frame with index > `after`, waiting up to `timeout` for one.
    std::optional<StreamFrame> wait_frame(std::uint64_t after, std::chrono::milliseconds timeout) {
        std::unique_lock lock(mutex_);
        wake_.wait_for(lock, timeout, [&] { return stop_ || frame_count_ > after; });
        for (const auto& f : frames_)
            if (f.index > after) return f;
        return std::nullopt;
    }

    /// Blocks until nothing is queued or running.
    void wait_idle() {
        std::unique_lock lock(mutex_);
        wake_.wait(lock, [&] { return order_.empty() && !busy_; });
    }

    Stats stats() const {
        std::lock_guard lock(mutex_);
        return stats_;
    }

private:
    struct Pending {
        StreamRequest latest;
        std::vector<std::uint64_t> superseded;
    };

    static constexpr std::size_t kKeptFrames = 64;

    void work() {
        for (;;) {
            {
                std::unique_lock lock(mutex_);
                wake_.wait(lock, [&] { return stop_ || !order_.empty(); });
                if (stop_) return;
            }
            run_once();
        }
    }

    Solver solve_;
    mutable std::mutex mutex_;
    std::condition_variable wake_;
    std::map<std::string, Pending> pending_;
    std::deque<std::string> order_;
    std::deque<StreamFrame> frames_;
    std::uint64_t frame_count_ = 0;
    Stats stats_;
    bool busy_ = false;
    bool stop_ = false;
    std::thread worker_;
};

/// Wire form of a frame: u32 little-endian header length, JSON header, geometry buffer.
inline std::string encode_frame(const StreamFrame& f) {
    Json h{{"frame", f.index}, {"revision", f.revision}, {"instance", f.instance}, {"acks", f.acks}};
    if (!f.error.empty()) h["error"] = f.error;
    const std::string header = h.dump();
    std::string out;
    const auto n = static_cast<std::uint32_t>(header.size());
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((n >> (8 * i)) & 0xff));
    return out + header + f.geometry;
}

/// Splits a wire frame into its JSON header and geometry bytes.
inline std::pair<Json, std::string> decode_frame(const std::string& bytes) {
    if (bytes.size() < 4) throw ParseError(0, "stream frame is truncated");
    std::uint32_t n = 0;
    for (int i = 0; i < 4; ++i) n |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
    if (bytes.size() < 4ull + n) throw ParseError(0, "stream frame header is truncated");
    return {Json::parse(bytes.substr(4, n)), bytes.substr(4 + n)};
}

} // namespace sculpt
