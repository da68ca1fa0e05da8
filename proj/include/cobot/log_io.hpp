#pragma once

#include <string>

#include "cobot/sim.hpp"

namespace cobot {

/// Writes a log as comma-separated text: one metadata line carrying the
/// sample rate, a header naming every signal with its unit, one row per
/// sample. Values are printed with full round-trip precision so
/// write -> read is bit-exact.
void write_log(const SimLog& log, const std::string& path);

/// Reads a file produced by write_log (or any table with the same header
/// layout). Throws ParseError naming the offending line on malformed input.
SimLog read_log(const std::string& path);

/// Measurement-noise knob for identification robustness studies. `level` is
/// the relative torque noise: tau_m picks up a multiplicative Gaussian factor
/// (1 + level * xi), and q an additive Gaussian of sigma = level * 2e-3 rad
/// (0.5% torque noise pairs with ~1e-5 rad encoder noise). Only these two
/// signals are noised: they are the ones the drive actually measures. The
/// same seed always yields the same draw.
SimLog with_noise(const SimLog& log, double level, unsigned long long seed);

} // namespace cobot
