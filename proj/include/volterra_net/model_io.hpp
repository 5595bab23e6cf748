#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "volterra_net/baselines.hpp"
#include "volterra_net/neural_sve.hpp"

namespace vnet {

inline constexpr int kModelFormatVersion = 1;

// Binary layout: 8-byte magic "NSVEPAR1", little-endian u64 count, count little-endian f64.
void write_param_binary(const std::filesystem::path& file, std::span<const double> values);
std::vector<double> read_param_binary(const std::filesystem::path& file);

// A model is stored as <stem>.bin (parameters) and <stem>.json (kind, dims, block offsets).
void save_model(const NeuralSveModel& model, const std::filesystem::path& stem);
void save_model(const NeuralSdeModel& model, const std::filesystem::path& stem);
void save_model(const DeepOnetModel& model, const std::filesystem::path& stem);

std::unique_ptr<PathModel> load_model(const std::filesystem::path& stem);

}  // namespace vnet
