#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "entrain/error.hpp"
#include "entrain/sim.hpp"
#include "entrain/synth.hpp"

namespace entrain::io {

inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Columns t, x1..xn, dx1..dxn, u and, with a gain, V = g |dx|^2.
inline std::string trajectory_csv(const Trajectory& tr, const GainFunction* gain = nullptr) {
    const std::size_t n = tr.dimension();
    const bool dx = tr.has_displacements();
    std::ostringstream os;
    os << "t";
    for (std::size_t i = 1; i <= n; ++i) os << ",x" << i;
    if (dx)
        for (std::size_t i = 1; i <= n; ++i) os << ",dx" << i;
    os << ",u";
    if (gain && dx) os << ",V";
    os << "\n";
    for (std::size_t j = 0; j < tr.size(); ++j) {
        os << format_real(tr.times[j]);
        for (double v : tr.states[j]) os << "," << format_real(v);
        if (dx)
            for (double v : tr.displacements[j]) os << "," << format_real(v);
        os << "," << format_real(tr.input_values[j]);
        if (gain && dx) {
            const double d = norm2(tr.displacements[j]);
            os << "," << format_real(gain->value(tr.times[j]) * d * d);
        }
        os << "\n";
    }
    return os.str();
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::Configuration, "cannot write " + path);
    f << text;
}

}  // namespace entrain::io
