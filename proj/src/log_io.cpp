#include "cobot/log_io.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include "cobot/errors.hpp"

namespace cobot {

namespace {

// Per-joint signal blocks in file order; tcp follows.
const struct Block {
    const char* name;
    const char* unit;
    MatX SimLog::*field;
} kBlocks[] = {
    {"q", "rad", &SimLog::q},
    {"qd", "rad_s", &SimLog::qd},
    {"q_m", "rad", &SimLog::q_m},
    {"qd_m", "rad_s", &SimLog::qd_m},
    {"I", "A", &SimLog::I},
    {"tau_m", "Nm", &SimLog::tau_m},
    {"tau_f", "Nm", &SimLog::tau_f},
    {"tau_trans", "Nm", &SimLog::tau_trans},
    {"tau_ext", "Nm", &SimLog::tau_ext},
    {"q_ref", "rad", &SimLog::q_ref},
};

void append_number(std::string& out, double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

} // namespace

void write_log(const SimLog& log, const std::string& path) {
    std::ofstream file(path);
    if (!file) throw ParseError("cannot open '" + path + "' for writing");

    const int n = log.joints();
    std::string line = "# sample_rate_hz=";
    append_number(line, log.sample_rate);
    line += "\ntime_s";
    for (const auto& b : kBlocks) {
        for (int k = 0; k < n; ++k) {
            line += ',';
            line += b.name;
            line += '_' + std::to_string(k + 1) + '_';
            line += b.unit;
        }
    }
    for (const char* axis : {"x", "y", "z"}) {
        line += ",tcp_";
        line += axis;
        line += "_m";
    }
    file << line << '\n';

    for (int row = 0; row < log.samples(); ++row) {
        line.clear();
        append_number(line, log.t[row]);
        for (const auto& b : kBlocks) {
            const MatX& m = log.*(b.field);
            for (int k = 0; k < n; ++k) {
                line += ',';
                append_number(line, m(row, k));
            }
        }
        for (int k = 0; k < 3; ++k) {
            line += ',';
            append_number(line, log.tcp(row, k));
        }
        file << line << '\n';
    }
    if (!file) throw ParseError("write to '" + path + "' failed");
}

SimLog read_log(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw ParseError("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(file, line) || line.rfind("# sample_rate_hz=", 0) != 0) {
        throw ParseError(path + ": missing sample-rate line");
    }
    SimLog log;
    log.sample_rate = std::strtod(line.c_str() + 17, nullptr);
    if (!(log.sample_rate > 0.0)) {
        throw ParseError(path + ": sample rate must be positive");
    }

    if (!std::getline(file, line)) throw ParseError(path + ": missing header");
    std::vector<std::string> names;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) names.push_back(cell);
    }
    const int block_count = static_cast<int>(sizeof(kBlocks) / sizeof(kBlocks[0]));
    const int extras = 1 + 3; // time + tcp
    if (names.size() < static_cast<size_t>(extras + block_count) ||
        (names.size() - extras) % block_count != 0) {
        throw ParseError(path + ": header does not match the log layout");
    }
    const int n = static_cast<int>((names.size() - extras) / block_count);
    if (names.front() != "time_s") {
        throw ParseError(path + ": first column must be time_s");
    }
    for (int b = 0; b < block_count; ++b) {
        for (int k = 0; k < n; ++k) {
            const std::string expect = std::string(kBlocks[b].name) + '_' +
                                       std::to_string(k + 1) + '_' +
                                       kBlocks[b].unit;
            if (names[1 + b * n + k] != expect) {
                throw ParseError(path + ": unexpected column '" +
                                 names[1 + b * n + k] + "', expected '" +
                                 expect + "'");
            }
        }
    }

    std::vector<std::vector<double>> rows;
    const size_t want = names.size();
    for (int lineno = 3; std::getline(file, line); ++lineno) {
        if (line.empty()) continue;
        std::vector<double> vals;
        vals.reserve(want);
        const char* p = line.c_str();
        while (true) {
            char* end = nullptr;
            vals.push_back(std::strtod(p, &end));
            if (end == p) {
                throw ParseError(path + ":" + std::to_string(lineno) +
                                 ": malformed number");
            }
            p = end;
            if (*p == ',') {
                ++p;
            } else if (*p == '\0' || *p == '\r') {
                break;
            } else {
                throw ParseError(path + ":" + std::to_string(lineno) +
                                 ": unexpected character '" +
                                 std::string(1, *p) + "'");
            }
        }
        if (vals.size() != want) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(want) + " values, got " +
                             std::to_string(vals.size()));
        }
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw ParseError(path + ": no samples");

    const int samples = static_cast<int>(rows.size());
    log.t.resize(samples);
    for (int b = 0; b < block_count; ++b) (log.*(kBlocks[b].field)).resize(samples, n);
    log.tcp.resize(samples, 3);
    for (int row = 0; row < samples; ++row) {
        const auto& vals = rows[row];
        log.t[row] = vals[0];
        for (int b = 0; b < block_count; ++b) {
            MatX& m = log.*(kBlocks[b].field);
            for (int k = 0; k < n; ++k) m(row, k) = vals[1 + b * n + k];
        }
        for (int k = 0; k < 3; ++k) log.tcp(row, k) = vals[1 + block_count * n + k];
    }
    return log;
}

SimLog with_noise(const SimLog& log, double level, unsigned long long seed) {
    if (level < 0.0) throw ValidationError("noise level must be >= 0");
    SimLog out = log;
    if (level == 0.0) return out;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double sigma_q = level * 2e-3;
    for (int row = 0; row < out.samples(); ++row) {
        for (int k = 0; k < out.joints(); ++k) {
            out.tau_m(row, k) *= 1.0 + level * gauss(rng);
            out.q(row, k) += sigma_q * gauss(rng);
        }
    }
    return out;
}

} // namespace cobot
