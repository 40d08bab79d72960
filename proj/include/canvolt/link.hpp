#pragma once

// CAN 2.0A data-link layer: frame codec, bit decision, arbitration, receiver
// sampling and the error/retransmission state machine.

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "canvolt/common.hpp"

namespace canvolt {

class LinkError : public Error {
public:
    enum class Code { InvalidFrame, IdCollision, EmptyContenders, InvalidTiming };
    LinkError(Code code, const std::string& what) : Error(what), code_(code) {}
    Code code() const noexcept { return code_; }

private:
    Code code_;
};

inline constexpr std::uint16_t kMaxStandardId = 0x7FF;
inline constexpr int kErrorFlagBits = 6;
inline constexpr int kErrorDelimiterBits = 8;
inline constexpr int kIntermissionBits = 3;
inline constexpr int kEofBits = 7;
inline constexpr std::uint16_t kCrcPolynomial = 0x4599;

struct Frame {
    std::uint16_t id = 0;
    std::uint8_t dlc = 0;
    std::vector<std::uint8_t> data;
    bool rtr = false;

    friend bool operator==(const Frame&, const Frame&) = default;
};

inline Frame make_frame(std::uint16_t id, std::vector<std::uint8_t> data, bool rtr = false) {
    if (id > kMaxStandardId) throw LinkError(LinkError::Code::InvalidFrame, "identifier exceeds 11 bits");
    if (data.size() > 8) throw LinkError(LinkError::Code::InvalidFrame, "at most 8 data bytes");
    if (rtr && !data.empty()) throw LinkError(LinkError::Code::InvalidFrame, "remote frames carry no data");
    const auto dlc = static_cast<std::uint8_t>(data.size());
    return Frame{id, dlc, std::move(data), rtr};
}

struct BitTiming {
    double bus_speed = 500'000.0;
    double sample_point = 0.75;
    double decode_hold = 340e-9;
    double dominant_threshold = 0.9;
    double recessive_threshold = 0.5;
    /// Loop delay by which a receiver-driven ACK reaches the transmitter late.
    double ack_delay = 432e-9;

    double bit_time() const { return 1.0 / bus_speed; }
    Picos bit_picos() const { return to_picos(bit_time()); }
    Picos sample_picos() const { return to_picos(sample_point * bit_time()); }
    Picos hold_picos() const { return to_picos(decode_hold); }

    void validate() const {
        if (!(bus_speed > 0)) throw LinkError(LinkError::Code::InvalidTiming, "bus_speed must be > 0");
        if (!(sample_point > 0 && sample_point < 1))
            throw LinkError(LinkError::Code::InvalidTiming, "sample_point must be in (0, 1)");
        if (!(decode_hold > 0 && decode_hold < bit_time()))
            throw LinkError(LinkError::Code::InvalidTiming, "decode_hold must be in (0, bit_time)");
        if (!(recessive_threshold < dominant_threshold))
            throw LinkError(LinkError::Code::InvalidTiming, "recessive threshold must be below dominant threshold");
        if (!(ack_delay >= 0 && ack_delay < bit_time()))
            throw LinkError(LinkError::Code::InvalidTiming, "ack_delay must be in [0, bit_time)");
    }
};

/// Bitstream of a data or remote frame as driven by its transmitter (ACK slot
/// recessive), with positions of the fixed-form fields.
struct EncodedFrame {
    std::vector<Bit> bits;
    std::size_t data_end = 0;  // one past the last stuffed data-field bit
    std::size_t crc_delimiter = 0;
    std::size_t ack_slot = 0;
    std::size_t ack_delimiter = 0;
    std::size_t eof_begin = 0;
};

inline std::uint16_t crc15(std::span<const Bit> bits) {
    std::uint16_t crc = 0;
    for (Bit b : bits) {
        const bool next = (b == Bit::Recessive) != (((crc >> 14) & 1u) != 0);
        crc = static_cast<std::uint16_t>((crc << 1) & 0x7FFF);
        if (next) crc ^= kCrcPolynomial;
    }
    return crc;
}

namespace detail {

inline void append_bits(std::vector<Bit>& out, unsigned value, int width) {
    for (int k = width - 1; k >= 0; --k) out.push_back(((value >> k) & 1u) ? Bit::Recessive : Bit::Dominant);
}

inline Bit flip(Bit b) { return b == Bit::Dominant ? Bit::Recessive : Bit::Dominant; }

}  // namespace detail

inline EncodedFrame encode_frame(const Frame& f) {
    std::vector<Bit> raw;
    raw.push_back(Bit::Dominant);  // SOF
    detail::append_bits(raw, f.id, 11);
    raw.push_back(f.rtr ? Bit::Recessive : Bit::Dominant);
    raw.push_back(Bit::Dominant);  // IDE
    raw.push_back(Bit::Dominant);  // r0
    detail::append_bits(raw, f.dlc, 4);
    for (auto byte : f.data) detail::append_bits(raw, byte, 8);
    const std::size_t data_raw_end = raw.size();
    detail::append_bits(raw, crc15(raw), 15);

    EncodedFrame out;
    int run = 0;
    Bit last = Bit::Recessive;
    for (std::size_t k = 0; k < raw.size(); ++k) {
        out.bits.push_back(raw[k]);
        run = (k > 0 && raw[k] == last) ? run + 1 : 1;
        last = raw[k];
        if (run == 5) {
            last = detail::flip(last);
            out.bits.push_back(last);
            run = 1;
        }
        if (k + 1 == data_raw_end) out.data_end = out.bits.size();
    }
    out.crc_delimiter = out.bits.size();
    out.bits.push_back(Bit::Recessive);
    out.ack_slot = out.bits.size();
    out.bits.push_back(Bit::Recessive);
    out.ack_delimiter = out.bits.size();
    out.bits.push_back(Bit::Recessive);
    out.eof_begin = out.bits.size();
    out.bits.insert(out.bits.end(), kEofBits, Bit::Recessive);
    return out;
}

/// Dominant-to-recessive edges over the stuffed SOF..data span.
inline int dominant_to_recessive_transitions(const EncodedFrame& e) {
    int n = 0;
    for (std::size_t k = 1; k < e.data_end; ++k)
        if (e.bits[k - 1] == Bit::Dominant && e.bits[k] == Bit::Recessive) ++n;
    return n;
}

/// Frame errors. Bit and Ack are only detected by the transmitter.
enum class DecodeError { None, Stuff, Crc, Form, Bit, Ack };

inline const char* to_string(DecodeError e) {
    switch (e) {
        case DecodeError::None: return "none";
        case DecodeError::Stuff: return "stuff";
        case DecodeError::Crc: return "crc";
        case DecodeError::Form: return "form";
        case DecodeError::Bit: return "bit";
        case DecodeError::Ack: return "ack";
    }
    return "?";
}

struct DecodeResult {
    std::optional<Frame> frame;
    DecodeError error = DecodeError::None;
    std::size_t bit_index = 0;  // where the error was detected

    bool ok() const { return error == DecodeError::None; }
};

/// Incremental receiver: consumes sampled bus bits from the start of a frame
/// attempt. Leading recessive bits are idle bus. The frame is accepted once a
/// valid ACK delimiter has been received.
class FrameReceiver {
public:
    enum class Status { Idle, Receiving, Accepted, Failed };

    Status push(Bit b) {
        const std::size_t idx = count_++;
        switch (phase_) {
            case Phase::Done: return status_;
            case Phase::Idle:
                if (b == Bit::Recessive) return status_;
                phase_ = Phase::Stuffed;
                status_ = Status::Receiving;
                [[fallthrough]];
            case Phase::Stuffed: return push_stuffed(b, idx);
            case Phase::CrcDelimiter:
                if (b == Bit::Dominant) return fail(DecodeError::Form, idx);
                crc_ok_ = crc_received_ == crc15(std::span(raw_).first(crc_begin_));
                phase_ = Phase::AckSlot;
                return status_;
            case Phase::AckSlot: phase_ = Phase::AckDelimiter; return status_;
            case Phase::AckDelimiter:
                if (b == Bit::Dominant) return fail(DecodeError::Form, idx);
                if (!crc_ok_) return fail(DecodeError::Crc, idx);
                phase_ = Phase::Done;
                status_ = Status::Accepted;
                return status_;
        }
        return status_;
    }

    Status status() const { return status_; }
    /// True while the next bit is the ACK slot and the frame checked out so far.
    bool wants_ack() const { return phase_ == Phase::AckSlot && crc_ok_; }
    DecodeError error() const { return error_; }
    std::size_t error_bit() const { return error_bit_; }
    std::size_t bits_consumed() const { return count_; }
    const Frame& frame() const { return frame_; }

private:
    enum class Phase { Idle, Stuffed, CrcDelimiter, AckSlot, AckDelimiter, Done };
    static constexpr std::size_t kHeaderBits = 19;  // SOF, id, RTR, IDE, r0, DLC

    Status fail(DecodeError e, std::size_t idx) {
        error_ = e;
        error_bit_ = idx;
        phase_ = Phase::Done;
        status_ = Status::Failed;
        return status_;
    }

    unsigned field(std::size_t from, std::size_t width) const {
        unsigned v = 0;
        for (std::size_t k = from; k < from + width; ++k) v = (v << 1) | (raw_[k] == Bit::Recessive ? 1u : 0u);
        return v;
    }

    Status push_stuffed(Bit b, std::size_t idx) {
        if (expect_stuff_) {
            if (b == last_) return fail(DecodeError::Stuff, idx);
            expect_stuff_ = false;
            last_ = b;
            run_ = 1;
        } else {
            run_ = (!raw_.empty() && b == last_) ? run_ + 1 : 1;
            last_ = b;
            raw_.push_back(b);
            expect_stuff_ = run_ == 5;
            if (raw_.size() == 14 && b == Bit::Recessive) return fail(DecodeError::Form, idx);  // IDE
            if (raw_.size() == kHeaderBits) {
                const bool rtr = raw_[12] == Bit::Recessive;
                const unsigned dlc = field(15, 4);
                frame_.id = static_cast<std::uint16_t>(field(1, 11));
                frame_.rtr = rtr;
                frame_.dlc = static_cast<std::uint8_t>(dlc);
                crc_begin_ = kHeaderBits + 8 * (rtr ? 0u : std::min(dlc, 8u));
            }
            if (raw_.size() == crc_begin_ + 15) {
                for (std::size_t k = kHeaderBits; k < crc_begin_; k += 8)
                    frame_.data.push_back(static_cast<std::uint8_t>(field(k, 8)));
                crc_received_ = static_cast<std::uint16_t>(field(crc_begin_, 15));
            }
        }
        if (!expect_stuff_ && crc_begin_ > 0 && raw_.size() == crc_begin_ + 15) phase_ = Phase::CrcDelimiter;
        return status_;
    }

    Phase phase_ = Phase::Idle;
    Status status_ = Status::Idle;
    std::vector<Bit> raw_;
    std::size_t count_ = 0;
    std::size_t crc_begin_ = 0;
    int run_ = 0;
    Bit last_ = Bit::Recessive;
    bool expect_stuff_ = false;
    bool crc_ok_ = false;
    std::uint16_t crc_received_ = 0;
    Frame frame_;
    DecodeError error_ = DecodeError::None;
    std::size_t error_bit_ = 0;
};

/// Inverse of encode_frame. The ACK slot may be either level; the stream
/// must start with SOF and end with a complete end-of-frame field.
inline DecodeResult decode_bitstream(std::span<const Bit> bits) {
    auto fail = [](DecodeError e, std::size_t at) { return DecodeResult{std::nullopt, e, at}; };
    if (bits.empty() || bits[0] != Bit::Dominant) return fail(DecodeError::Form, 0);
    FrameReceiver rx;
    for (Bit b : bits) {
        const auto s = rx.push(b);
        if (s == FrameReceiver::Status::Failed) return fail(rx.error(), rx.error_bit());
        if (s == FrameReceiver::Status::Accepted) break;
    }
    if (rx.status() != FrameReceiver::Status::Accepted) return fail(DecodeError::Form, bits.size());
    const std::size_t eof = rx.bits_consumed();
    for (int k = 0; k < kEofBits; ++k)
        if (eof + k >= bits.size() || bits[eof + k] != Bit::Recessive) return fail(DecodeError::Form, eof + k);
    return DecodeResult{rx.frame(), DecodeError::None, 0};
}

/// Receiver comparator with hysteresis: inside the band the previous decision holds.
inline Bit decide_bit(double v_diff, Bit prev, const BitTiming& timing) {
    if (v_diff > timing.dominant_threshold) return Bit::Dominant;
    if (v_diff < timing.recessive_threshold) return Bit::Recessive;
    return prev;
}

/// Index of the contender with the lowest identifier.
inline std::size_t arbitrate_index(std::span<const Frame> contenders) {
    if (contenders.empty()) throw LinkError(LinkError::Code::EmptyContenders, "arbitration needs at least one frame");
    std::size_t best = 0;
    for (std::size_t k = 1; k < contenders.size(); ++k)
        if (contenders[k].id < contenders[best].id) best = k;
    for (std::size_t a = 0; a < contenders.size(); ++a)
        for (std::size_t b = a + 1; b < contenders.size(); ++b)
            if (contenders[a].id == contenders[b].id)
                throw LinkError(LinkError::Code::IdCollision, "two contenders share identifier " +
                                                                  std::to_string(contenders[a].id));
    return best;
}

inline Frame arbitrate(std::span<const Frame> contenders) { return contenders[arbitrate_index(contenders)]; }

/// A maximal interval of constant comparator output, starting at `start`
/// (relative to the bit start; the first run may begin before the bit).
struct ComparatorRun {
    Picos start;
    Bit level;
};

/// Level the protocol controller registers at the sample point. A comparator
/// run that disagrees with the expected bus level only counts if it persists
/// for at least the decode hold time around the sample point; shorter
/// disturbances are ignored.
inline Bit sample_runs(std::span<const ComparatorRun> runs, Picos bit_end, Picos t_sample, Picos hold, Bit expected) {
    std::size_t k = 0;
    while (k + 1 < runs.size() && runs[k + 1].start <= t_sample) ++k;
    if (runs.empty() || runs[k].level == expected) return expected;
    const Picos run_end = k + 1 < runs.size() ? runs[k + 1].start : bit_end;
    const Picos lo = std::max(runs[k].start, t_sample - hold);
    const Picos hi = std::min(run_end, t_sample + hold);
    return hi - lo >= hold ? runs[k].level : expected;
}

/// Samples one bit of an arbitrary differential waveform. The comparator is
/// stepped on a 1 ns grid from the bit start; `prev` is its state entering the bit.
inline Bit sample_bit(const std::function<double(double)>& v_diff, double bit_start, const BitTiming& timing,
                      Bit prev, Bit expected) {
    constexpr Picos step = 1000;
    const Picos bit = timing.bit_picos();
    std::vector<ComparatorRun> runs{{-bit, prev}};
    Bit state = prev;
    for (Picos t = 0; t < bit; t += step) {
        const Bit d = decide_bit(v_diff(bit_start + to_seconds(t)), state, timing);
        if (d != state) {
            if (t == 0)
                runs.back().level = d;
            else
                runs.push_back({t, d});
            state = d;
        }
    }
    return sample_runs(runs, bit, timing.sample_picos(), timing.hold_picos(), expected);
}

/// Error-signalling and retransmission state of one transmitting ECU.
struct LinkState {
    std::deque<Frame> queue;
    int retransmissions = 0;
    bool error_active = true;
    std::optional<double> last_error_time;
    bool in_flight = false;
};

namespace link_event {
struct Enqueue {
    Frame frame;
};
struct AttemptSucceeded {
    double t;
};
struct AttemptFailed {
    double t;
    DecodeError error;
};
}  // namespace link_event

using LinkEvent = std::variant<link_event::Enqueue, link_event::AttemptSucceeded, link_event::AttemptFailed>;

namespace bus_action {
struct StartFrame {
    Frame frame;
    bool retransmission;
};
struct ErrorFlag {
    int bits = kErrorFlagBits;
};
struct ErrorDelimiter {
    int bits = kErrorDelimiterBits;
};
struct Intermission {
    int bits = kIntermissionBits;
};
}  // namespace bus_action

using BusAction =
    std::variant<bus_action::StartFrame, bus_action::ErrorFlag, bus_action::ErrorDelimiter, bus_action::Intermission>;

struct LinkStepResult {
    LinkState state;
    std::vector<BusAction> actions;
};

/// Pure transition of the link state machine. A frame stays queued until an
/// attempt completes without error; a failed attempt is followed by an error
/// frame, intermission, and a retransmission of the same frame.
inline LinkStepResult link_step(LinkState state, const LinkEvent& event) {
    std::vector<BusAction> actions;
    std::visit(
        [&](const auto& e) {
            using E = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<E, link_event::Enqueue>) {
                state.queue.push_back(e.frame);
                if (!state.in_flight) {
                    state.in_flight = true;
                    actions.push_back(bus_action::StartFrame{state.queue.front(), false});
                }
            } else if constexpr (std::is_same_v<E, link_event::AttemptSucceeded>) {
                if (!state.queue.empty()) state.queue.pop_front();
                state.in_flight = false;
                actions.push_back(bus_action::Intermission{});
                if (!state.queue.empty()) {
                    state.in_flight = true;
                    actions.push_back(bus_action::StartFrame{state.queue.front(), false});
                }
            } else {
                state.last_error_time = e.t;
                actions.push_back(bus_action::ErrorFlag{});
                actions.push_back(bus_action::ErrorDelimiter{});
                actions.push_back(bus_action::Intermission{});
                if (!state.queue.empty()) {
                    ++state.retransmissions;
                    state.in_flight = true;
                    actions.push_back(bus_action::StartFrame{state.queue.front(), true});
                } else {
                    state.in_flight = false;
                }
            }
        },
        event);
    return {std::move(state), std::move(actions)};
}

/// Bits from the SOF of a failed attempt to the SOF of its retransmission,
/// when the error is detected at `error_bit` (0-based).
inline int retransmission_spacing_bits(std::size_t error_bit) {
    return static_cast<int>(error_bit) + 1 + kErrorFlagBits + kErrorDelimiterBits + kIntermissionBits;
}

}  // namespace canvolt
