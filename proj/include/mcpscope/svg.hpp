#pragma once

#include <optional>
#include <string>
#include <vector>

namespace mcpscope::svg {

struct Series {
    std::string name;
    std::vector<double> y;  // NaN = no value
    std::string color;
    bool dashed = false;
    bool markers = false;
    bool line = true;
    std::vector<double> lower{};  // optional band, same length as y
    std::vector<double> upper{};
};

struct Axes {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<double> x;
    std::vector<std::string> x_ticks;  // label per x, empty strings skipped
    std::optional<double> y_min, y_max;
    bool log_y = false;
    bool percent_y = false;
};

/// Lines (with optional bands and markers).
std::string lines(const Axes& axes, const std::vector<Series>& series);

/// Stacked areas bottom-to-top in the given order, then overlay lines on top.
std::string stacked(const Axes& axes, const std::vector<Series>& areas, const std::vector<Series>& overlay = {});

/// Horizontal bars.
std::string bars(const std::string& title, const std::vector<std::string>& labels, const std::vector<double>& values,
                 bool percent = true);

/// Colour from a fixed palette.
std::string palette(std::size_t i);

}  // namespace mcpscope::svg
