#pragma once

// Scenario simulator behind run_scenario. Included from engine.hpp.

namespace canvolt {
namespace detail {

/// Seconds to picoseconds, rounding up unless within 1e-3 ps of the grid.
inline Picos ceil_picos(double seconds) {
    const double p = seconds * 1e12;
    const double r = std::round(p);
    return static_cast<Picos>(std::abs(p - r) < 1e-3 ? r : std::ceil(p));
}

/// Everything the DC solution depends on at one instant.
struct DcKey {
    bool dominant = false;
    bool has_h = false;
    bool has_l = false;
    double level_h = 0.0;
    double level_l = 0.0;
    double cap_h = 0.0;
    double cap_l = 0.0;

    bool operator==(const DcKey&) const = default;
};

struct DcValue {
    LineVoltages v;
    double i_h = 0.0;
    double i_l = 0.0;
};

/// A line voltage that is either settled or relaxing exponentially toward
/// `target` from `v0` since `t0`.
struct LineDyn {
    double target = 0.0;
    double v0 = 0.0;
    Picos t0 = 0;
    bool relaxing = false;

    double at(Picos t, double tau) const {
        if (!relaxing) return target;
        return target - (target - v0) * std::exp(-to_seconds(t - t0) / tau);
    }

    bool operator==(const LineDyn&) const = default;
};

/// Bus waveform and comparator state as seen by one set of nodes.
struct View {
    LineDyn h;
    LineDyn l;
    Bit comp = Bit::Recessive;
    Picos run_start = 0;

    bool operator==(const View&) const = default;
};

/// Constant-DC piece of a bit, absolute times.
struct Seg {
    Picos a;
    Picos b;
    DcKey key;
    bool canh_rise;  // the CANH attacker source stepped up at `a`
};

struct SenderRt {
    int ecu = 0;
    EncodedFrame enc;
    Picos period = 0;
    Picos next_release = 0;
    std::int64_t next_instance = 0;
    LinkState link;
    std::int64_t pending = -1;  // instance in the transmit buffer
    bool pending_started = false;
    int pending_retx = 0;
    bool retransmit_next = false;
    std::vector<char> received;
    std::vector<Picos> releases;
};

class Simulator {
public:
    explicit Simulator(const ScenarioConfig& cfg) : cfg_(cfg) {
        cfg.validate();
        const auto& t = cfg.timing;
        bit_ = t.bit_picos();
        ts_ = t.sample_picos();
        hold_ = t.hold_picos();
        ack_delay_ = to_picos(t.ack_delay);
        ext_ = to_picos(cfg.params.transition_extension);
        dur_ = to_picos(cfg.duration);
        topo_.termination_a = cfg.termination_a;
        topo_.termination_b = cfg.termination_b;
        r_load_ = topo_.r_load();

        for (std::size_t k = 0; k < cfg.ecus.size(); ++k) {
            const auto& e = cfg.ecus[k];
            trace_.ecus.push_back(e.name);
            if (e.role == EcuRole::VidsHost) vids_ = static_cast<int>(k);
            if (e.role == EcuRole::Logger) loggers_.push_back(static_cast<int>(k));
            if (e.role == EcuRole::Sender) {
                SenderRt s;
                s.ecu = static_cast<int>(k);
                s.enc = encode_frame(e.frame);
                s.period = to_picos(e.period);
                s.next_release = to_picos(e.offset);
                senders_.push_back(std::move(s));
            }
        }
        const auto& host = cfg.ecus[static_cast<std::size_t>(vids_)];
        src_resistance_ = host.source_resistance;
        src_limit_ = host.source_current_limit;
        first_receiver_ = loggers_.empty() ? vids_ : loggers_.front();

        if (cfg.attack) {
            const auto& a = *cfg.attack;
            has_attack_ = true;
            atk_a_ = to_picos(a.t_start);
            atk_b_ = to_picos(a.t_end);
            trace_.attack = attack_name(a.attack);
            if (const auto* p = std::get_if<attack::Pulse>(&a.attack)) {
                pulse_ = true;
                pulse_line_ = p->line;
                pulse_origin_ = to_picos(pulse_origin(a));
                pulse_period_ = to_picos(p->period);
                pulse_high_ = static_cast<Picos>(std::llround(p->duty * static_cast<double>(pulse_period_)));
                pulse_v_high_ = p->v_high;
                pulse_v_low_ = p->v_low;
            }
        }
        dev_[0] = cfg.irs.make();
        dev_[1] = cfg.irs.make();
        coil_a_ = to_picos(std::min(cfg.irs.coil_t_start, 1e6));
        coil_b_ = to_picos(std::min(cfg.irs.coil_t_end, 1e6));
        has_coil_ = cfg.irs.coil_drive != 0.0 && cfg.irs.kind == DeviceKind::Thermostat;
        dmg_ = cfg.damage;
        dmg_.over_timer = 0.0;
        dmg_.damaged = false;
        sample_period_ = to_picos(cfg.trace.sample_period);
    }

    RunResult run() {
        Picos t = 0;
        while (true) {
            for (auto& s : senders_) release_due(s, t);
            int winner = -1;
            if (t < dur_) {
                for (std::size_t k = 0; k < senders_.size(); ++k) {
                    if (senders_[k].pending < 0) continue;
                    if (winner < 0 || frame_of(senders_[k]).id < frame_of(senders_[static_cast<std::size_t>(winner)]).id)
                        winner = static_cast<int>(k);
                }
            }
            if (winner >= 0) {
                t = attempt(t, senders_[static_cast<std::size_t>(winner)]);
                continue;
            }
            Picos next = dur_;
            for (const auto& s : senders_)
                if (s.next_release < next) next = s.next_release;
            if (next <= t) break;
            advance(t, next, false, nullptr);
            t = next;
            if (t >= dur_) break;
        }
        return finish();
    }

private:
    // ---- traffic -------------------------------------------------------

    const Frame& frame_of(const SenderRt& s) const { return cfg_.ecus[static_cast<std::size_t>(s.ecu)].frame; }

    void release_due(SenderRt& s, Picos t) {
        while (s.next_release <= t && s.next_release < dur_) {
            const std::int64_t inst = s.next_instance++;
            s.releases.push_back(s.next_release);
            s.received.push_back(0);
            const Frame& f = frame_of(s);
            if (s.pending >= 0) {
                s.link.queue.front() = f;  // replaces the pending instance
            } else {
                s.link = link_step(s.link, link_event::Enqueue{f}).state;
            }
            s.pending = inst;
            s.pending_started = false;
            s.pending_retx = 0;
            s.retransmit_next = false;
            s.next_release += s.period;
        }
    }

    void record(Picos t, TraceKind kind, int ecu = -1, int line = -1, double value = 0.0, std::int64_t a = 0,
                std::int64_t b = 0) {
        trace_.records.push_back(TraceRecord{t, kind, static_cast<std::int8_t>(line), ecu, value, a, b});
    }

    // ---- electrical ----------------------------------------------------

    bool attack_active(Picos t) const { return has_attack_ && t >= atk_a_ && t < atk_b_; }

    Picos pulse_phase(Picos t) const {
        Picos ph = (t - pulse_origin_) % pulse_period_;
        return ph < 0 ? ph + pulse_period_ : ph;
    }

    DcKey make_key(Picos t, bool dominant) const {
        DcKey k;
        k.dominant = dominant;
        if (attack_active(t)) {
            std::optional<double> h, l;
            std::visit(
                [&](const auto& a) {
                    using A = std::decay_t<decltype(a)>;
                    if constexpr (std::is_same_v<A, attack::PassiveOvercurrent>) {
                        l = 0.0;
                    } else if constexpr (std::is_same_v<A, attack::ActiveOvercurrent>) {
                        h = kMaxPinLevel;
                        l = 0.0;
                    } else if constexpr (std::is_same_v<A, attack::DoS>) {
                        l = a.v_attack_l;
                    } else if constexpr (std::is_same_v<A, attack::ForcedRetransmission>) {
                        h = a.v_attack_h;
                    } else {
                        const double v = pulse_phase(t) < pulse_high_ ? pulse_v_high_ : pulse_v_low_;
                        (a.line == Line::CanH ? h : l) = v;
                    }
                },
                cfg_.attack->attack);
            const PinLink lh = device_link(dev_[0]), ll = device_link(dev_[1]);
            if (h && lh.connected) {
                k.has_h = true;
                k.level_h = *h;
                k.cap_h = std::min(src_limit_, lh.current_limit);
            }
            if (l && ll.connected) {
                k.has_l = true;
                k.level_l = *l;
                k.cap_l = std::min(src_limit_, ll.current_limit);
            }
        }
        return k;
    }

    const DcValue& dc(const DcKey& key) {
        for (const auto& [k, v] : cache_)
            if (k == key) return v;
        std::optional<LineSource> h, l;
        if (key.has_h) h = LineSource{key.level_h, src_resistance_, key.cap_h};
        if (key.has_l) l = LineSource{key.level_l, src_resistance_, key.cap_l};
        const NetworkState s = solve_lines(key.dominant, h, l, cfg_.params, r_load_);
        cache_.emplace_back(key, DcValue{s.v, key.has_h ? -s.i.source_h : 0.0, key.has_l ? -s.i.source_l : 0.0});
        return cache_.back().second;
    }

    double coil_drive(Picos t) const { return has_coil_ && t >= coil_a_ && t < coil_b_ ? cfg_.irs.coil_drive : 0.0; }

    /// Whether pulse edges change anything physical on an idle (recessive) bus.
    bool idle_pulse_matters(Picos t) {
        DcKey hi = make_key(t, false), lo = hi;
        const bool on_h = pulse_line_ == Line::CanH;
        if (!(on_h ? hi.has_h : hi.has_l)) return false;
        (on_h ? hi.level_h : hi.level_l) = pulse_v_high_;
        (on_h ? lo.level_h : lo.level_l) = pulse_v_low_;
        const DcValue a = dc(hi), b = dc(lo);
        return a.i_h != b.i_h || a.i_l != b.i_l;
    }

    Picos next_cut(Picos a, Picos limit, bool dominant, bool waveform) {
        Picos b = limit;
        auto consider = [&](Picos c) {
            if (c > a && c < b) b = c;
        };
        if (has_attack_) {
            consider(atk_a_);
            consider(atk_b_);
            if (pulse_ && attack_active(a) && (waveform || dominant || idle_pulse_matters(a))) {
                const Picos ph = pulse_phase(a);
                consider(a + (ph < pulse_high_ ? pulse_high_ - ph : pulse_period_ - ph));
            }
        }
        if (has_coil_) {
            consider(coil_a_);
            consider(coil_b_);
        }
        if (sample_period_ > 0) consider(sample_next_);
        return b;
    }

    static TraceKind switch_kind(const ProtectiveDevice& after) {
        switch (after.index()) {
            case 1: return TraceKind::FuseBlown;
            case 2: return TraceKind::BreakerTripped;
            case 3:
                return std::get<ResettableFuseState>(after).open ? TraceKind::ResettableFuseOpen
                                                                 : TraceKind::ResettableFuseClosed;
            default:
                return std::get<ThermostatCoil>(after).open ? TraceKind::ThermostatOpen : TraceKind::ThermostatClosed;
        }
    }

    /// Advances devices, damage and samples over [from, to) with the bus held
    /// dominant or recessive; collects constant-DC segments when `segs` is set.
    void advance(Picos from, Picos to, bool dominant, std::vector<Seg>* segs) {
        Picos a = from;
        int stalls = 0;
        while (a < to) {
            if (has_attack_ && a == atk_a_ && !started_) {
                started_ = true;
                record(a, TraceKind::AttackStart, vids_);
            }
            if (has_attack_ && a == atk_b_ && !ended_) {
                ended_ = true;
                record(a, TraceKind::AttackEnd, vids_);
            }
            const Picos b = next_cut(a, to, dominant, segs != nullptr);
            const DcKey key = make_key(a, dominant);
            const DcValue cur = dc(key);
            if (sample_period_ > 0 && a == sample_next_) {
                if (a < dur_) {
                    record(a, TraceKind::LineVoltageSample, vids_, 0, cur.v.v_canh);
                    record(a, TraceKind::LineVoltageSample, vids_, 1, cur.v.v_canl);
                    record(a, TraceKind::PinCurrentSample, vids_, 0, cur.i_h);
                    record(a, TraceKind::PinCurrentSample, vids_, 1, cur.i_l);
                }
                sample_next_ += sample_period_;
            }
            const double coil = coil_drive(a);
            const double amps[2] = {cur.i_h, cur.i_l};
            Picos c = std::numeric_limits<Picos>::max();
            for (int line = 0; line < 2; ++line) {
                const double tc = device_time_to_change(dev_[line], amps[line], std::abs(amps[line]) + coil);
                if (std::isfinite(tc)) c = std::min(c, a + ceil_picos(tc));
            }
            const Picos end = std::min(b, c);

            const double worst = std::max(std::abs(cur.i_h), std::abs(cur.i_l));
            const double td = damage_time_to_trip(dmg_, worst);
            if (std::isfinite(td)) {
                const Picos d = a + ceil_picos(td);
                // A device switching at the same instant isolates first.
                const bool switching = c <= b;
                if ((switching && d < c) || (!switching && d <= b)) {
                    dmg_.damaged = true;
                    damage_at_ = d;
                    record(d, TraceKind::Damage, vids_, std::abs(amps[1]) > std::abs(amps[0]) ? 1 : 0, worst);
                }
            }
            if (!dmg_.damaged && end > a) {
                if (worst > dmg_.i_max)
                    dmg_.over_timer += to_seconds(end - a);
                else
                    dmg_.over_timer = 0.0;
            }

            for (int line = 0; line < 2; ++line) {
                const bool before = device_conducts_fully(dev_[line]);
                const PinLink lb = device_link(dev_[line]);
                dev_[line] = device_advance(dev_[line], amps[line], std::abs(amps[line]) + coil, to_seconds(end - a));
                const PinLink la = device_link(dev_[line]);
                if (la.connected != lb.connected || la.current_limit != lb.current_limit ||
                    before != device_conducts_fully(dev_[line])) {
                    const TraceKind kind = switch_kind(dev_[line]);
                    record(end, kind, vids_, line, amps[line]);
                    summary_.device_events.push_back({line == 0 ? Line::CanH : Line::CanL, kind, to_seconds(end)});
                }
            }
            if (segs && end > a) {
                const bool rise = pulse_ && pulse_line_ == Line::CanH && key.has_h && attack_active(a) &&
                                  a > atk_a_ && pulse_phase(a) == 0;
                segs->push_back(Seg{a, end, key, rise});
            }
            if (end == a) {
                if (++stalls > 1000) throw Error("protective devices do not settle at t=" + format_seconds(a));
            } else {
                stalls = 0;
            }
            a = end;
        }
    }

    // ---- comparator ----------------------------------------------------

    void settle_view(View& v, Picos t) {
        const DcValue& d = dc(make_key(t, false));
        v.h = LineDyn{d.v.v_canh, d.v.v_canh, t, false};
        v.l = LineDyn{d.v.v_canl, d.v.v_canl, t, false};
        v.comp = decide_bit(d.v.v_diff(), Bit::Recessive, cfg_.timing);
        v.run_start = t - bit_;
    }

    void update_line(LineDyn& line, double target, bool forced, bool dominant, Picos a) const {
        if (line.target == target) return;
        if (!forced && !dominant && slow_recovery(target, cfg_.params)) {
            const double now = line.at(a, cfg_.params.tau_rc);
            line = LineDyn{target, now, a, now != target};
        } else {
            line = LineDyn{target, target, a, false};
        }
    }

    /// First instant in (a, b) at which the comparator leaves state `s`;
    /// `b` if it stays.
    Picos crossing(const View& v, Bit s, Picos a, Picos b) const {
        const double tau = cfg_.params.tau_rc;
        const auto& tm = cfg_.timing;
        if (v.h.relaxing && v.l.relaxing) {
            Bit state = s;
            for (Picos t = a + 1000; t < b; t += 1000)
                if ((state = decide_bit(v.h.at(t, tau) - v.l.at(t, tau), state, tm)) != s) return t;
            return b;
        }
        const bool low_moves = v.l.relaxing;
        const LineDyn& m = low_moves ? v.l : v.h;
        const double other = low_moves ? v.h.at(a, tau) : v.l.at(a, tau);
        const double thr = s == Bit::Dominant ? tm.recessive_threshold : tm.dominant_threshold;
        // Level of the moving line at which v_diff equals the threshold.
        const double level = low_moves ? other - thr : other + thr;
        const double ttr = RecoveryWaveform{m.v0, m.target, tau}.time_to_reach(level);
        if (!std::isfinite(ttr)) return b;
        const Picos x = m.t0 + static_cast<Picos>(std::floor(ttr * 1e12)) + 1;
        if (x >= b) return b;
        // Only a move in the direction that leaves `s` counts.
        const double after = (low_moves ? other - m.at(x, tau) : m.at(x, tau) - other);
        const Bit d = decide_bit(after, s, tm);
        return d != s ? std::max(x, a) : b;
    }

    Bit run_view(View& v, Picos t0, const std::vector<Seg>& segs, Bit expected) {
        runs_.clear();
        runs_.push_back({v.run_start - t0, v.comp});
        auto set = [&](Picos t, Bit s) {
            if (s == v.comp) return;
            if (runs_.back().start == t - t0)
                runs_.back().level = s;
            else
                runs_.push_back({t - t0, s});
            v.comp = s;
            v.run_start = t;
        };
        const double tau = cfg_.params.tau_rc;
        for (const Seg& sg : segs) {
            Picos a = sg.a;
            if (sg.canh_rise && ext_ > 0) {
                a = std::min(sg.b, a + ext_);
                if (a >= sg.b) continue;
            }
            const DcValue& d = dc(sg.key);
            update_line(v.h, d.v.v_canh, sg.key.has_h, sg.key.dominant, a);
            update_line(v.l, d.v.v_canl, sg.key.has_l, sg.key.dominant, a);
            set(a, decide_bit(v.h.at(a, tau) - v.l.at(a, tau), v.comp, cfg_.timing));
            if (v.h.relaxing || v.l.relaxing) {
                const Picos x = crossing(v, v.comp, a, sg.b);
                if (x < sg.b) set(x, v.comp == Bit::Dominant ? Bit::Recessive : Bit::Dominant);
            }
        }
        return sample_runs(runs_, bit_, ts_, hold_, expected);
    }

    /// Copy of `segs` with the bus held dominant for the first `until` of the bit.
    std::vector<Seg> with_dominant_prefix(const std::vector<Seg>& segs, Picos until) const {
        std::vector<Seg> out;
        for (const Seg& s : segs) {
            if (s.b <= until) {
                Seg c = s;
                c.key.dominant = true;
                out.push_back(c);
            } else if (s.a < until) {
                Seg c = s;
                c.key.dominant = true;
                c.b = until;
                out.push_back(c);
                Seg r = s;
                r.a = until;
                r.canh_rise = false;
                out.push_back(r);
            } else {
                out.push_back(s);
            }
        }
        return out;
    }

    // ---- frame attempts ------------------------------------------------

    void on_received(SenderRt& s, Picos t) {
        auto& flag = s.received[static_cast<std::size_t>(s.pending)];
        if (flag) return;
        flag = 1;
        const Frame& f = frame_of(s);
        for (int lg : loggers_) record(t, TraceKind::FrameReceived, lg, -1, f.id, s.ecu, s.pending);
    }

    Picos attempt(Picos t0, SenderRt& s) {
        const Frame& f = frame_of(s);
        const EncodedFrame& enc = s.enc;
        if (s.retransmit_next) {
            ++retransmissions_;
            if (attack_active(t0)) ++retransmissions_in_window_;
            if (cfg_.trace.frame_errors)
                record(t0, TraceKind::Retransmission, s.ecu, -1, s.pending_retx, f.id, s.pending);
        } else if (!s.pending_started) {
            s.pending_started = true;
            ++frames_sent_;
            record(t0, TraceKind::FrameSent, s.ecu, -1, 0.0, f.id, s.pending);
        }

        const bool receivers = cfg_.ecus.size() > 1;
        FrameReceiver rx;
        View rxv, txv;
        settle_view(rxv, t0);
        txv = rxv;
        bool acked = false;
        for (std::size_t k = 0; k < enc.bits.size(); ++k) {
            const Picos t = t0 + static_cast<Picos>(k) * bit_;
            const bool ack_slot = k == enc.ack_slot;
            const bool dom = enc.bits[k] == Bit::Dominant || (ack_slot && receivers && rx.wants_ack());
            if (ack_slot) acked = dom;
            const Bit nominal = dom ? Bit::Dominant : Bit::Recessive;
            segs_.clear();
            advance(t, t + bit_, dom, &segs_);

            const bool same = txv == rxv;
            const Bit rb = run_view(rxv, t, segs_, nominal);
            Bit tb;
            if (k == enc.ack_delimiter && acked && ack_delay_ > 0) {
                tb = run_view(txv, t, with_dominant_prefix(segs_, t + ack_delay_), Bit::Recessive);
            } else if (same) {
                tb = rb;
                txv = rxv;
            } else {
                tb = run_view(txv, t, segs_, nominal);
            }

            if (receivers) rx.push(rb);
            DecodeError err = DecodeError::None;
            int who = s.ecu;
            if (ack_slot) {
                if (tb == Bit::Recessive) err = DecodeError::Ack;
            } else if (tb != enc.bits[k]) {
                err = (k == enc.crc_delimiter || k >= enc.ack_delimiter) ? DecodeError::Form : DecodeError::Bit;
            }
            if (rx.status() == FrameReceiver::Status::Accepted) on_received(s, t + bit_);
            if (err == DecodeError::None && rx.status() == FrameReceiver::Status::Failed) {
                err = rx.error();
                who = first_receiver_;
            }
            if (err != DecodeError::None) return fail_attempt(s, t + bit_, who, err, k);
        }
        const Picos end = t0 + static_cast<Picos>(enc.bits.size()) * bit_;
        s.link = link_step(s.link, link_event::AttemptSucceeded{to_seconds(end)}).state;
        s.pending = -1;
        s.retransmit_next = false;
        advance(end, end + kIntermissionBits * bit_, false, nullptr);
        return end + kIntermissionBits * bit_;
    }

    Picos fail_attempt(SenderRt& s, Picos flag, int who, DecodeError err, std::size_t bit) {
        ++error_frames_;
        if (cfg_.trace.frame_errors)
            record(flag, TraceKind::ErrorFrame, who, -1, 0.0, static_cast<std::int64_t>(err),
                   static_cast<std::int64_t>(bit));
        s.link = link_step(s.link, link_event::AttemptFailed{to_seconds(flag), err}).state;
        s.retransmit_next = true;
        ++s.pending_retx;
        const Picos d = flag + kErrorFlagBits * bit_;
        advance(flag, d, true, nullptr);
        const Picos end = d + (kErrorDelimiterBits + kIntermissionBits) * bit_;
        advance(d, end, false, nullptr);
        return end;
    }

    // ---- summary -------------------------------------------------------

    RunResult finish() {
        Summary& sm = summary_;
        sm.frames_sent = frames_sent_;
        for (const auto& s : senders_)
            for (char r : s.received) sm.frames_received += r;
        sm.undelivered = sm.frames_sent - sm.frames_received;
        sm.retransmissions = retransmissions_;
        sm.error_frames = error_frames_;
        sm.damaged = dmg_.damaged;
        if (dmg_.damaged) sm.damage_time = to_seconds(damage_at_);
        if (!senders_.empty()) {
            const auto& s = senders_.front();
            sm.indicator.assign(s.received.begin(), s.received.end());
        }
        if (has_attack_) evaluate_attack();
        std::stable_sort(trace_.records.begin(), trace_.records.end(),
                         [](const TraceRecord& x, const TraceRecord& y) { return x.t < y.t; });
        return RunResult{std::move(trace_), std::move(summary_)};
    }

    void evaluate_attack() {
        Summary& sm = summary_;
        switch (cfg_.attack->attack.index()) {
            case 0:
            case 1:
                sm.attack_success = sm.damaged;
                if (!sm.attack_success) sm.failure_reason = "pin current stayed within i_max";
                return;
            case 3:
                sm.attack_success = retransmissions_in_window_ > 0;
                if (!sm.attack_success) sm.failure_reason = "no retransmission forced";
                return;
            default: break;
        }
        int released = 0, delivered = 0;
        for (const auto& s : senders_)
            for (std::size_t k = 0; k < s.releases.size(); ++k)
                if (attack_active(s.releases[k])) {
                    ++released;
                    delivered += s.received[k];
                }
        sm.attack_success = released > 0 && delivered == 0;
        if (released == 0)
            sm.failure_reason = "no frame released during the attack";
        else if (delivered > 0)
            sm.failure_reason = std::to_string(delivered) + " of " + std::to_string(released) +
                                " frames delivered during the attack";
    }

    const ScenarioConfig& cfg_;
    Picos bit_ = 0, ts_ = 0, hold_ = 0, ack_delay_ = 0, ext_ = 0, dur_ = 0;
    BusTopology topo_;
    double r_load_ = 60.0;
    int vids_ = 0;
    int first_receiver_ = 0;
    std::vector<int> loggers_;
    std::vector<SenderRt> senders_;
    double src_resistance_ = 0.0;
    double src_limit_ = std::numeric_limits<double>::infinity();

    bool has_attack_ = false;
    bool started_ = false;
    bool ended_ = false;
    Picos atk_a_ = 0, atk_b_ = 0;
    bool pulse_ = false;
    Line pulse_line_ = Line::CanL;
    Picos pulse_origin_ = 0, pulse_period_ = 1, pulse_high_ = 0;
    double pulse_v_high_ = 0.0, pulse_v_low_ = 0.0;

    ProtectiveDevice dev_[2];
    bool has_coil_ = false;
    Picos coil_a_ = 0, coil_b_ = 0;
    EcuDamage dmg_;
    Picos damage_at_ = 0;
    Picos sample_period_ = 0;
    Picos sample_next_ = 0;

    std::vector<std::pair<DcKey, DcValue>> cache_;
    std::vector<Seg> segs_;
    std::vector<ComparatorRun> runs_;

    Trace trace_;
    Summary summary_;
    int frames_sent_ = 0;
    int retransmissions_ = 0;
    int retransmissions_in_window_ = 0;
    int error_frames_ = 0;
};

}  // namespace detail

/// Deterministic simulation of one scenario.
inline RunResult run_scenario(const ScenarioConfig& cfg) { return detail::Simulator(cfg).run(); }

struct SweepRow {
    double value;
    bool success;
    std::string reason;
    Summary summary;
};

/// Independent runs per grid value, executed concurrently; rows keep grid order.
inline std::vector<SweepRow> run_sweep(const std::vector<double>& values,
                                       const std::function<ScenarioConfig(double)>& make, unsigned threads = 0) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    std::vector<SweepRow> rows(values.size());
    auto one = [&](std::size_t k) {
        const Summary s = run_scenario(make(values[k])).summary;
        rows[k] = SweepRow{values[k], s.attack_success, s.failure_reason, s};
    };
    for (std::size_t base = 0; base < values.size(); base += threads) {
        std::vector<std::future<void>> jobs;
        for (std::size_t k = base; k < std::min(values.size(), base + threads); ++k)
            jobs.push_back(std::async(std::launch::async, one, k));
        for (auto& j : jobs) j.get();
    }
    return rows;
}

}  // namespace canvolt
