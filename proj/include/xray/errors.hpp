#pragma once

#include <stdexcept>
#include <string>

namespace xray {

// Thrown when tensor/layer shapes do not line up. The message names both shapes.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown on invalid parameter values (alpha <= 0, empty dataset, ...).
struct ValueError : std::runtime_error {
    explicit ValueError(const std::string& msg) : std::runtime_error(msg) {}
};

// File and codec failures; the message names the offending path.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Line-oriented config/manifest parse failure.
struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, int line_no)
        : std::runtime_error(msg + " (line " + std::to_string(line_no) + ")"), line(line_no) {}
    int line;
};

// Training aborted on a non-finite loss.
struct DivergedError : std::runtime_error {
    DivergedError(int epoch_, int batch_)
        : std::runtime_error("non-finite loss at epoch " + std::to_string(epoch_) +
                             ", batch " + std::to_string(batch_)),
          epoch(epoch_), batch(batch_) {}
    int epoch;
    int batch;
};

}  // namespace xray
