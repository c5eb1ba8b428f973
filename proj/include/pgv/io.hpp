/* File I/O and noise generation.
 *
 * Formats:
 *  - PGM: binary P5 and ASCII P2, 8-bit (maxval <= 255). Saving clamps to
 *    [0,255] and rounds half away from zero, so PGM export of float data
 *    is lossy by design; use the sidecar format for exact round-trips.
 *  - Float sidecar: two 32-bit little-endian unsigned dimensions (height,
 *    then width) followed by height*width little-endian IEEE-754 doubles,
 *    row-major.
 *  - Run configuration: flat "key = value" lines, '#' comments, unknown
 *    keys rejected. See the README for the versioned key list.
 *
 * Noise pipeline (fixed, for bit-reproducibility): a std::mt19937_64
 * engine seeded with `seed` produces raw 64-bit words consumed in pairs
 * per pixel pair (row-major); each word maps to a uniform via its top 53
 * bits, u1 = ((x >> 11) + 1) * 2^-53 in (0,1], u2 = (y >> 11) * 2^-53 in
 * [0,1); the Box-Muller transform then yields two normal samples
 * sigma*sqrt(-2 ln u1)*(cos, sin)(2 pi u2). Identical (image, sigma,
 * seed) inputs give bit-identical outputs.
 */
#pragma once

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pgv/core.hpp"

namespace pgv {

// ---------------------------------------------------------------------------
// PGM
// ---------------------------------------------------------------------------

namespace detail {

struct PnmCursor {
    const std::string& bytes;
    std::size_t pos = 0;

    bool eof() const { return pos >= bytes.size(); }

    void skip_space_and_comments() {
        while (!eof()) {
            const char c = bytes[pos];
            if (c == '#') {
                while (!eof() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos;
            } else {
                break;
            }
        }
    }

    std::string token() {
        skip_space_and_comments();
        std::size_t start = pos;
        while (!eof() && !std::isspace(static_cast<unsigned char>(bytes[pos])) &&
               bytes[pos] != '#') {
            ++pos;
        }
        return bytes.substr(start, pos - start);
    }

    long token_int(const char* what) {
        const std::string tok = token();
        if (tok.empty()) throw FormatError(std::string("pgm: missing ") + what);
        char* end = nullptr;
        const long v = std::strtol(tok.c_str(), &end, 10);
        if (end != tok.c_str() + tok.size()) {
            throw FormatError(std::string("pgm: malformed ") + what + " '" + tok + "'");
        }
        return v;
    }
};

inline std::string read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    if (!f && !f.eof()) throw IoError("read failed for " + path);
    return std::move(ss).str();
}

} // namespace detail

/// Loads an 8-bit grayscale PGM (binary P5 or ASCII P2) as reals in [0,255].
inline ScalarImage load_pgm(const std::string& path) {
    const std::string bytes = detail::read_file_bytes(path);
    detail::PnmCursor cur{bytes};

    const std::string magic = cur.token();
    if (magic != "P5" && magic != "P2") {
        throw FormatError("pgm: unsupported magic '" + magic + "' (want P5 or P2)");
    }
    const long w = cur.token_int("width");
    const long h = cur.token_int("height");
    const long maxval = cur.token_int("maxval");
    if (w < 2 || h < 2) throw DimensionError("pgm: image must be at least 2x2");
    if (maxval < 1 || maxval > 255) {
        throw FormatError("pgm: maxval " + std::to_string(maxval) + " unsupported (8-bit only)");
    }

    const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    std::vector<double> values(n);
    if (magic == "P5") {
        // Exactly one whitespace byte separates the header from the raster.
        if (cur.eof() || !std::isspace(static_cast<unsigned char>(bytes[cur.pos]))) {
            throw FormatError("pgm: missing raster separator");
        }
        ++cur.pos;
        if (bytes.size() - cur.pos < n) throw FormatError("pgm: truncated raster");
        for (std::size_t i = 0; i < n; ++i) {
            values[i] = static_cast<double>(static_cast<unsigned char>(bytes[cur.pos + i]));
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const long v = cur.token_int("sample");
            if (v < 0 || v > maxval) throw FormatError("pgm: sample out of range");
            values[i] = static_cast<double>(v);
        }
    }
    return ScalarImage(static_cast<int>(h), static_cast<int>(w), std::move(values));
}

/// Clamps to [0,255], rounds half away from zero and writes binary P5.
inline void save_pgm(const ScalarImage& img, const std::string& path) {
    validate_image(img);
    std::string out = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) +
                      "\n255\n";
    out.reserve(out.size() + img.size());
    for (double x : img.values()) {
        double c = std::round(x);
        if (c < 0.0) c = 0.0;
        if (c > 255.0) c = 255.0;
        out.push_back(static_cast<char>(static_cast<unsigned char>(c)));
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write failed for " + path);
}

// ---------------------------------------------------------------------------
// Noise
// ---------------------------------------------------------------------------

struct NoiseSpec {
    double sigma = 25.0;
    std::uint64_t seed = 0;

    NoiseSpec(double sigma_in, std::uint64_t seed_in) : sigma(sigma_in), seed(seed_in) {
        if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
            throw InvalidParameter("NoiseSpec: sigma must be finite and >= 0");
        }
    }
};

/// Adds i.i.d. N(0, sigma^2) samples, unclamped, via the documented
/// mt19937_64 + Box-Muller pipeline (see the header comment).
inline ScalarImage add_gaussian_noise(const ScalarImage& img, const NoiseSpec& spec) {
    validate_image(img);
    if (spec.sigma == 0.0) return img;

    ScalarImage out = img;
    auto vals = out.values();
    std::mt19937_64 rng(spec.seed);
    constexpr double kInv53 = 1.0 / 9007199254740992.0; // 2^-53

    const std::size_t n = vals.size();
    for (std::size_t i = 0; i < n; i += 2) {
        const std::uint64_t x = rng();
        const std::uint64_t y = rng();
        const double u1 = (static_cast<double>(x >> 11) + 1.0) * kInv53; // (0, 1]
        const double u2 = static_cast<double>(y >> 11) * kInv53;         // [0, 1)
        const double r = spec.sigma * std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        vals[i] += r * std::cos(angle);
        if (i + 1 < n) vals[i + 1] += r * std::sin(angle);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Float sidecar
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32_le(std::string& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

inline void put_f64_le(std::string& out, double x) {
    const auto v = std::bit_cast<std::uint64_t>(x);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

inline std::uint32_t get_u32_le(const std::string& s, std::size_t pos) {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[pos + b])) << (8 * b);
    }
    return v;
}

inline double get_f64_le(const std::string& s, std::size_t pos) {
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) {
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[pos + b])) << (8 * b);
    }
    return std::bit_cast<double>(v);
}

} // namespace detail

/// Writes the exact float image: height, width (u32 LE), then row-major
/// doubles (LE). Lossless companion to the clamped PGM export.
inline void save_sidecar(const ScalarImage& img, const std::string& path) {
    validate_image(img);
    std::string out;
    out.reserve(8 + img.size() * 8);
    detail::put_u32_le(out, static_cast<std::uint32_t>(img.height()));
    detail::put_u32_le(out, static_cast<std::uint32_t>(img.width()));
    for (double x : img.values()) detail::put_f64_le(out, x);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write failed for " + path);
}

inline ScalarImage load_sidecar(const std::string& path) {
    const std::string bytes = detail::read_file_bytes(path);
    if (bytes.size() < 8) throw FormatError("sidecar: truncated header");
    const std::uint32_t h = detail::get_u32_le(bytes, 0);
    const std::uint32_t w = detail::get_u32_le(bytes, 4);
    const std::size_t n = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    if (bytes.size() != 8 + n * 8) throw FormatError("sidecar: size does not match dimensions");
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = detail::get_f64_le(bytes, 8 + i * 8);
    return ScalarImage(static_cast<int>(h), static_cast<int>(w), std::move(values));
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct RunConfig {
    SolverConfig solver;
    GridSpec grid = GridSpec::reference_box();
    std::optional<NoiseSpec> noise;
    std::string input_path;
    std::string output_path;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline ParseError config_error(int line, const std::string& msg) {
    return ParseError("config line " + std::to_string(line) + ": " + msg);
}

inline double parse_double(const std::string& tok, int line) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (tok.empty() || end != tok.c_str() + tok.size() || !std::isfinite(v)) {
        throw config_error(line, "malformed number '" + tok + "'");
    }
    return v;
}

inline long long parse_int(const std::string& tok, int line) {
    char* end = nullptr;
    const long long v = std::strtoll(tok.c_str(), &end, 10);
    if (tok.empty() || end != tok.c_str() + tok.size()) {
        throw config_error(line, "malformed integer '" + tok + "'");
    }
    return v;
}

// A list is either comma-separated values or an inclusive range a:step:b.
inline std::vector<double> parse_list(const std::string& value, int line) {
    std::vector<double> out;
    if (value.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ':')) parts.push_back(trim(item));
        if (parts.size() != 3) throw config_error(line, "range must be start:step:end");
        const double start = parse_double(parts[0], line);
        const double step = parse_double(parts[1], line);
        const double end = parse_double(parts[2], line);
        if (!(step > 0.0)) throw config_error(line, "range step must be positive");
        for (int k = 0;; ++k) {
            const double x = start + k * step;
            if (x > end + step * 1e-9) break;
            out.push_back(x);
        }
    } else {
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(parse_double(trim(item), line));
    }
    if (out.empty()) throw config_error(line, "empty list");
    return out;
}

} // namespace detail

/// Parses the flat key=value run configuration. Empty input yields all
/// defaults; unknown keys raise UnknownKeyError; malformed or out-of-range
/// values raise ParseError with the line number.
inline RunConfig load_config(std::istream& in) {
    RunConfig cfg;
    std::vector<double> a0 = cfg.grid.alpha0_values, a1 = cfg.grid.alpha1_values,
                        sv = cfg.grid.s_values, tvv = cfg.grid.t_values;
    std::optional<double> noise_sigma;
    std::optional<std::uint64_t> noise_seed;

    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::size_t hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string s = detail::trim(raw);
        if (s.empty()) continue;
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos) throw detail::config_error(line, "expected key = value");
        const std::string key = detail::trim(s.substr(0, eq));
        const std::string value = detail::trim(s.substr(eq + 1));

        if (key == "version") {
            if (detail::parse_int(value, line) != 1) {
                throw detail::config_error(line, "unsupported config version (want 1)");
            }
        } else if (key == "solver.max_iters") {
            const long long v = detail::parse_int(value, line);
            if (v < 1) throw detail::config_error(line, "solver.max_iters must be positive");
            cfg.solver.max_iters = static_cast<int>(v);
        } else if (key == "solver.tolerance") {
            const double v = detail::parse_double(value, line);
            if (!(v > 0.0)) throw detail::config_error(line, "solver.tolerance must be positive");
            cfg.solver.tolerance = v;
        } else if (key == "solver.step_safety") {
            const double v = detail::parse_double(value, line);
            if (!(v > 0.0 && v < 1.0)) {
                throw detail::config_error(line, "solver.step_safety must lie in (0,1)");
            }
            cfg.solver.step_safety = v;
        } else if (key == "solver.check_interval") {
            const long long v = detail::parse_int(value, line);
            if (v < 1) throw detail::config_error(line, "solver.check_interval must be positive");
            cfg.solver.check_interval = static_cast<int>(v);
        } else if (key == "grid.alpha0_values") {
            a0 = detail::parse_list(value, line);
        } else if (key == "grid.alpha1_values") {
            a1 = detail::parse_list(value, line);
        } else if (key == "grid.s_values") {
            sv = detail::parse_list(value, line);
        } else if (key == "grid.t_values") {
            tvv = detail::parse_list(value, line);
        } else if (key == "noise.sigma") {
            const double v = detail::parse_double(value, line);
            if (!(v >= 0.0)) throw detail::config_error(line, "noise.sigma must be >= 0");
            noise_sigma = v;
        } else if (key == "noise.seed") {
            char* end = nullptr;
            const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
            if (value.empty() || end != value.c_str() + value.size()) {
                throw detail::config_error(line, "malformed seed '" + value + "'");
            }
            noise_seed = static_cast<std::uint64_t>(v);
        } else if (key == "io.input") {
            cfg.input_path = value;
        } else if (key == "io.output") {
            cfg.output_path = value;
        } else {
            throw UnknownKeyError("config line " + std::to_string(line) + ": unknown key '" +
                                  key + "'");
        }
    }

    try {
        cfg.grid = GridSpec(std::move(a0), std::move(a1), std::move(sv), std::move(tvv));
    } catch (const InvalidParameter& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    if (noise_sigma || noise_seed) {
        cfg.noise = NoiseSpec(noise_sigma.value_or(25.0), noise_seed.value_or(0));
    }
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    return load_config(f);
}

inline void save_config(const RunConfig& cfg, std::ostream& out) {
    auto num = [](double x) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", x);
        return std::string(buf);
    };
    auto list = [&](const std::vector<double>& xs) {
        std::string s;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (i) s += ", ";
            s += num(xs[i]);
        }
        return s;
    };
    out << "version = 1\n";
    out << "solver.max_iters = " << cfg.solver.max_iters << "\n";
    out << "solver.tolerance = " << num(cfg.solver.tolerance) << "\n";
    out << "solver.step_safety = " << num(cfg.solver.step_safety) << "\n";
    out << "solver.check_interval = " << cfg.solver.check_interval << "\n";
    out << "grid.alpha0_values = " << list(cfg.grid.alpha0_values) << "\n";
    out << "grid.alpha1_values = " << list(cfg.grid.alpha1_values) << "\n";
    out << "grid.s_values = " << list(cfg.grid.s_values) << "\n";
    out << "grid.t_values = " << list(cfg.grid.t_values) << "\n";
    if (cfg.noise) {
        out << "noise.sigma = " << num(cfg.noise->sigma) << "\n";
        out << "noise.seed = " << cfg.noise->seed << "\n";
    }
    if (!cfg.input_path.empty()) out << "io.input = " << cfg.input_path << "\n";
    if (!cfg.output_path.empty()) out << "io.output = " << cfg.output_path << "\n";
}

inline void save_config(const RunConfig& cfg, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for writing");
    save_config(cfg, f);
    if (!f) throw IoError("write failed for " + path);
}

} // namespace pgv
