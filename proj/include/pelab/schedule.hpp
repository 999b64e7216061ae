#pragma once

#include <cstdint>
#include <string>

#include "pelab/errors.hpp"

namespace pelab {

/**
 * Learning-rate schedule. Constant returns base at every step; harmonic
 * returns base / (offset + t), which is positive and nonincreasing in t.
 */
class StepSizeSchedule {
public:
    enum class Kind { constant, harmonic };

    static StepSizeSchedule constant(double base) {
        return StepSizeSchedule(Kind::constant, base, 1.0);
    }

    static StepSizeSchedule harmonic(double base, double offset) {
        return StepSizeSchedule(Kind::harmonic, base, offset);
    }

    double at(std::uint64_t t) const {
        if (kind_ == Kind::constant) return base_;
        return base_ / (offset_ + static_cast<double>(t));
    }

    Kind kind() const { return kind_; }
    double base() const { return base_; }
    double offset() const { return offset_; }

    std::string describe() const {
        if (kind_ == Kind::constant) return std::to_string(base_);
        return "harmonic(" + std::to_string(base_) + "," + std::to_string(offset_) + ")";
    }

private:
    StepSizeSchedule(Kind kind, double base, double offset)
        : kind_(kind), base_(base), offset_(offset) {
        if (base <= 0.0) throw ContractViolation("StepSizeSchedule: base must be positive");
        if (kind == Kind::harmonic && offset <= 0.0)
            throw ContractViolation("StepSizeSchedule: offset must be positive");
    }

    Kind kind_;
    double base_;
    double offset_;
};

}  // namespace pelab
