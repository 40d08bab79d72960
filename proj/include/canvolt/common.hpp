#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace canvolt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid scenario input. `path` names the offending field (e.g.
/// "attack.duty"); `line` is the source line, 0 when unknown.
class ConfigError : public Error {
public:
    ConfigError(int line, std::string path, const std::string& message)
        : Error(format(line, path, message)), line_(line), path_(std::move(path)), message_(message) {}

    int line() const noexcept { return line_; }
    const std::string& path() const noexcept { return path_; }
    const std::string& message() const noexcept { return message_; }

private:
    static std::string format(int line, const std::string& path, const std::string& message) {
        std::string out = line > 0 ? "line " + std::to_string(line) + ": " : "";
        if (!path.empty()) out += path + ": ";
        return out + message;
    }

    int line_;
    std::string path_;
    std::string message_;
};

enum class Line : std::uint8_t { CanH, CanL };

/// Logical bus level. Dominant is logical 0.
enum class Bit : std::uint8_t { Dominant = 0, Recessive = 1 };

inline const char* to_string(Bit b) { return b == Bit::Dominant ? "dominant" : "recessive"; }

inline const char* to_string(Line line) { return line == Line::CanH ? "CANH" : "CANL"; }

/// Simulation time in integer picoseconds. The engine works on this grid so
/// that event ordering and sweep thresholds are exact.
using Picos = std::int64_t;

inline constexpr Picos kPicosPerSecond = 1'000'000'000'000LL;

inline Picos to_picos(double seconds) { return static_cast<Picos>(std::llround(seconds * 1e12)); }
inline double to_seconds(Picos t) { return static_cast<double>(t) * 1e-12; }

/// Formats a picosecond timestamp as seconds with 12 decimals, without going
/// through floating point.
inline std::string format_seconds(Picos t) {
    const bool neg = t < 0;
    const auto mag = static_cast<std::uint64_t>(neg ? -t : t);
    std::string frac = std::to_string(mag % static_cast<std::uint64_t>(kPicosPerSecond));
    frac.insert(0, 12 - frac.size(), '0');
    return (neg ? "-" : "") + std::to_string(mag / static_cast<std::uint64_t>(kPicosPerSecond)) + "." + frac;
}

}  // namespace canvolt
