#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tsf/flow.hpp"
#include "tsf/tensor.hpp"

namespace tsf {

// L consecutive flow fields starting at frame tau, stacked as R x C x 2L.
// Zero-based channel 2k holds u of flow k (frames tau+k -> tau+k+1) and
// channel 2k+1 holds its v.
struct FlowStack {
  Tensor<float> data;
  int tau = 0;
  int length = 0;

  std::size_t rows() const { return data.dim(0); }
  std::size_t cols() const { return data.dim(1); }
  bool operator==(const FlowStack&) const = default;
};

FlowStack build_flow_stack(std::span<const FlowField> flows, int tau);

// Flow k of the stack as a field (0-based).
FlowField stack_flow(const FlowStack& stack, int k);

// Sub-stack of `length` flows starting at absolute frame `tau`; the source
// must cover [tau, tau + length).
FlowStack slice_flow_stack(const FlowStack& stack, int tau, int length);

// Network input from a stack: optionally subtract the stack's mean u and
// mean v, clamp to [-clip_mag, clip_mag], divide by clip_mag.
Tensor<float> normalize_flow_for_net(const FlowStack& stack, double clip_mag = 8.0, bool subtract_mean = true);

std::vector<std::uint8_t> encode_flow_stack(const FlowStack& stack);
FlowStack decode_flow_stack(std::span<const std::uint8_t> bytes);
void save_flow_stack(const FlowStack& stack, const std::filesystem::path& path);
FlowStack load_flow_stack(const std::filesystem::path& path);

// Side-by-side u | v grayscale rendering, mid-gray = zero, saturating at
// +-max_mag pixels.
void write_flow_pgm(const FlowField& flow, const std::filesystem::path& path, double max_mag = 4.0);

}  // namespace tsf
