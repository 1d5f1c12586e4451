#include "tsf/flow_stack.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tsf/binary_io.hpp"
#include "tsf/errors.hpp"

namespace tsf {

namespace {

constexpr char kMagic[] = "TSFS";
constexpr std::uint32_t kVersion = 1;

}  // namespace

FlowStack build_flow_stack(std::span<const FlowField> flows, int tau) {
  if (flows.empty()) throw ShapeError("flow stack needs at least one flow");
  const std::size_t R = flows[0].height(), C = flows[0].width(), L = flows.size();
  for (std::size_t k = 0; k < L; ++k) {
    if (flows[k].height() != R || flows[k].width() != C || !flows[k].u.same_dims(flows[k].v)) {
      throw ShapeError("flow " + std::to_string(k) + " is " + std::to_string(flows[k].height()) + "x" +
                       std::to_string(flows[k].width()) + ", expected " + std::to_string(R) + "x" + std::to_string(C));
    }
  }
  FlowStack s{Tensor<float>({R, C, 2 * L}), tau, static_cast<int>(L)};
  for (std::size_t k = 0; k < L; ++k)
    for (std::size_t i = 0; i < R; ++i)
      for (std::size_t j = 0; j < C; ++j) {
        s.data.at(i, j, 2 * k) = static_cast<float>(flows[k].u(i, j));
        s.data.at(i, j, 2 * k + 1) = static_cast<float>(flows[k].v(i, j));
      }
  return s;
}

FlowField stack_flow(const FlowStack& stack, int k) {
  if (k < 0 || k >= stack.length) throw ShapeError("flow index " + std::to_string(k) + " outside stack");
  const std::size_t R = stack.rows(), C = stack.cols(), kk = static_cast<std::size_t>(k);
  FlowField f(R, C);
  for (std::size_t i = 0; i < R; ++i)
    for (std::size_t j = 0; j < C; ++j) {
      f.u(i, j) = stack.data.at(i, j, 2 * kk);
      f.v(i, j) = stack.data.at(i, j, 2 * kk + 1);
    }
  return f;
}

FlowStack slice_flow_stack(const FlowStack& stack, int tau, int length) {
  if (length < 1 || tau < stack.tau || tau + length > stack.tau + stack.length) {
    throw DataError("flows [" + std::to_string(tau) + ", " + std::to_string(tau + length) + ") not covered by stack [" +
                    std::to_string(stack.tau) + ", " + std::to_string(stack.tau + stack.length) + ")");
  }
  const std::size_t R = stack.rows(), C = stack.cols(), Cin = stack.data.dim(2);
  const std::size_t first = 2 * static_cast<std::size_t>(tau - stack.tau), n = 2 * static_cast<std::size_t>(length);
  FlowStack out{Tensor<float>({R, C, n}), tau, length};
  const float* src = stack.data.raw();
  float* dst = out.data.raw();
  for (std::size_t p = 0; p < R * C; ++p) std::copy_n(src + p * Cin + first, n, dst + p * n);
  return out;
}

Tensor<float> normalize_flow_for_net(const FlowStack& stack, double clip_mag, bool subtract_mean) {
  if (!(clip_mag > 0.0)) throw InputError("clip magnitude must be > 0");
  const std::size_t n = stack.data.dim(2);
  double mean[2] = {0.0, 0.0};
  if (subtract_mean) {
    for (std::size_t k = 0; k < stack.data.size(); ++k) mean[(k % n) % 2] += stack.data[k];
    const double per = static_cast<double>(stack.data.size() / 2);
    mean[0] /= per;
    mean[1] /= per;
  }
  Tensor<float> out(stack.data.dims());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double x = std::clamp(stack.data[k] - mean[(k % n) % 2], -clip_mag, clip_mag);
    out[k] = static_cast<float>(x / clip_mag);
  }
  return out;
}

std::vector<std::uint8_t> encode_flow_stack(const FlowStack& stack) {
  io::ByteWriter w;
  w.magic(kMagic);
  w.u32(kVersion);
  w.i32(static_cast<std::int32_t>(stack.rows()));
  w.i32(static_cast<std::int32_t>(stack.cols()));
  w.i32(stack.length);
  w.i32(stack.tau);
  w.f32s(stack.data.data());
  return w.take();
}

FlowStack decode_flow_stack(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  r.expect_magic(kMagic, "flow stack");
  const std::size_t version_at = r.offset();
  if (r.u32() != kVersion) throw FormatError("unsupported flow stack version", version_at);
  const std::size_t dims_at = r.offset();
  const std::int32_t R = r.i32(), C = r.i32(), L = r.i32(), tau = r.i32();
  if (R < 1 || C < 1 || L < 1 || tau < 0) throw FormatError("invalid flow stack header", dims_at);
  const auto expect = static_cast<std::size_t>(R) * static_cast<std::size_t>(C) * 2 * static_cast<std::size_t>(L);
  if (r.remaining() != expect * 4) {
    throw FormatError("flow stack payload is " + std::to_string(r.remaining()) + " bytes, expected " +
                          std::to_string(expect * 4),
                      r.offset());
  }
  FlowStack s{Tensor<float>({static_cast<std::size_t>(R), static_cast<std::size_t>(C), 2 * static_cast<std::size_t>(L)}),
              tau, L};
  r.f32s(s.data.data());
  r.expect_end("flow stack");
  return s;
}

void save_flow_stack(const FlowStack& stack, const std::filesystem::path& path) {
  io::write_file(path, encode_flow_stack(stack));
}

FlowStack load_flow_stack(const std::filesystem::path& path) {
  return decode_flow_stack(io::read_file(path));
}

void write_flow_pgm(const FlowField& flow, const std::filesystem::path& path, double max_mag) {
  const std::size_t H = flow.height(), W = flow.width();
  std::vector<std::uint8_t> px(H * 2 * W);
  auto gray = [&](double x) {
    return static_cast<std::uint8_t>(std::lround(127.5 + 127.5 * std::clamp(x / max_mag, -1.0, 1.0)));
  };
  for (std::size_t i = 0; i < H; ++i)
    for (std::size_t j = 0; j < W; ++j) {
      px[i * 2 * W + j] = gray(flow.u(i, j));
      px[i * 2 * W + W + j] = gray(flow.v(i, j));
    }
  io::write_file(path, io::encode_pgm(H, 2 * W, px));
}

}  // namespace tsf
