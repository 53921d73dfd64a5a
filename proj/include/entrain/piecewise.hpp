#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

#include "entrain/error.hpp"
#include "entrain/intervals.hpp"

namespace entrain {

struct Periodicity {
    double start = 0.0;
    double period = 0.0;
    friend bool operator==(const Periodicity&, const Periodicity&) = default;
};

/// Function of time defined by contiguous pieces [t0, t1]. `Piece` needs
/// public members `t0` and `t1`. With a periodicity attached, time is wrapped
/// into the domain before evaluation; without one, evaluating outside the
/// domain (beyond a rounding-level slack) is an error.
template <class Piece>
class Piecewise {
public:
    Piecewise() = default;

    explicit Piecewise(std::vector<Piece> pieces) : pieces_(std::move(pieces)) {
        if (pieces_.empty()) throw Error(ErrorKind::InvalidInput, "piecewise function needs at least one piece");
        for (std::size_t i = 0; i < pieces_.size(); ++i) {
            if (!(pieces_[i].t1 > pieces_[i].t0)) {
                throw Error(ErrorKind::InvalidInput, "piecewise function: empty or reversed piece");
            }
            if (i > 0 && pieces_[i].t0 != pieces_[i - 1].t1) {
                throw Error(ErrorKind::InvalidInput, "piecewise function: pieces are not contiguous");
            }
        }
    }

    const std::vector<Piece>& pieces() const noexcept { return pieces_; }
    Window domain() const { return {pieces_.front().t0, pieces_.back().t1}; }
    const std::optional<Periodicity>& periodicity() const noexcept { return periodicity_; }
    void set_periodicity(Periodicity p) { periodicity_ = p; }

    double map_time(double t) const {
        const Window d = domain();
        if (periodicity_) {
            const double T = periodicity_->period;
            const double s = t - periodicity_->start;
            double r = s - std::floor(s / T) * T;
            if (r >= T) r -= T;
            if (r < 0.0) r = 0.0;
            return std::clamp(periodicity_->start + r, d.start, d.end);
        }
        const double slack = 1e-9 * std::max(1.0, std::max(std::abs(d.start), std::abs(d.end)));
        if (t < d.start - slack || t > d.end + slack) {
            std::ostringstream os;
            os << "time " << t << " outside the domain [" << d.start << ", " << d.end << "]";
            throw Error(ErrorKind::InvalidInput, os.str());
        }
        return std::clamp(t, d.start, d.end);
    }

    /// Piece containing the already-mapped time `tau`; junctions belong to
    /// the piece on their right.
    const Piece& locate(double tau) const {
        auto it = std::upper_bound(pieces_.begin(), pieces_.end(), tau,
                                   [](double v, const Piece& p) { return v < p.t1; });
        if (it == pieces_.end()) return pieces_.back();
        return *it;
    }

    /// Interior junction times of the base domain.
    std::vector<double> junctions() const {
        std::vector<double> out;
        for (std::size_t i = 1; i < pieces_.size(); ++i) out.push_back(pieces_[i].t0);
        return out;
    }

    /// Junction times (and periodic seams) strictly inside (a, b), sorted.
    std::vector<double> breakpoints(double a, double b) const {
        std::vector<double> base = junctions();
        std::vector<double> out;
        if (!periodicity_) {
            for (double t : base)
                if (t > a && t < b) out.push_back(t);
            return out;
        }
        base.insert(base.begin(), domain().start);
        const double T = periodicity_->period;
        const double k0 = std::floor((a - periodicity_->start) / T) - 1.0;
        for (double k = k0;; k += 1.0) {
            bool beyond = false;
            for (double t : base) {
                const double s = t + k * T;
                if (s > a && s < b) out.push_back(s);
                if (s >= b) beyond = true;
            }
            if (beyond) break;
        }
        std::sort(out.begin(), out.end());
        return out;
    }

protected:
    std::vector<Piece> pieces_;
    std::optional<Periodicity> periodicity_;
};

}  // namespace entrain
