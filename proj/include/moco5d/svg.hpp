#pragma once

#include "common.hpp"

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <vector>

namespace moco5d::svg {

struct Series
{
  std::string label;
  std::vector<double> y;
};

/// Line plot of series sharing x = x0 + i * dx.
std::string line_plot(std::vector<Series> const &series, double x0, double dx, std::string const &title, std::string const &xlabel);
/// Vertical bars with one label per bar.
std::string bar_chart(std::vector<double> const &values, std::vector<std::string> const &labels, std::string const &title);
/// Grayscale image of a matrix, row 0 at the top, scaled to [min, max].
std::string heatmap(Eigen::MatrixXd const &m, std::string const &title, std::string const &xlabel, std::string const &ylabel);

void write(std::filesystem::path const &path, std::string const &svg);

} // namespace moco5d::svg
