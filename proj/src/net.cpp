#include "posture/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "posture/tensor_io.hpp"

namespace posture::nn {

// ---------------------------------------------------------------------------
// ArchSpec

ArchSpec ArchSpec::modular() { return ArchSpec{}; }

ArchSpec ArchSpec::monolithic() {
  ArchSpec s;
  s.channels = 5;
  s.outputs = 15;
  return s;
}

std::vector<std::size_t> ArchSpec::spatial_chain() const {
  std::vector<std::size_t> chain{height};
  for (std::size_t i = 0; i < conv_widths.size(); ++i) chain.push_back((chain.back() + 1) / 2);
  return chain;
}

std::size_t ArchSpec::flattened() const {
  const std::size_t s = spatial_chain().back();
  return (conv_widths.empty() ? channels : conv_widths.back()) * s * s;
}

std::size_t ArchSpec::parameter_count() const {
  std::size_t n = 0, in = channels;
  for (auto out : conv_widths) {
    n += out * in * 9 + out;
    in = out;
  }
  return n + outputs * flattened() + outputs;
}

void ArchSpec::validate() const {
  if (height == 0 || width == 0 || channels == 0 || outputs == 0)
    throw std::invalid_argument("architecture: dimensions must be positive");
  if (height != width) throw std::invalid_argument("architecture: input must be square");
  if (std::any_of(conv_widths.begin(), conv_widths.end(), [](std::size_t w) { return w == 0; }))
    throw std::invalid_argument("architecture: convolution widths must be positive");
}

// ---------------------------------------------------------------------------
// Network

namespace {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using ColMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowMap = Eigen::Map<RowMatrix<Scalar>>;
template <typename Scalar>
using ConstRowMap = Eigen::Map<const RowMatrix<Scalar>>;

// cols[(c*3+kh)*3+kw, (b*s+h)*s+w] = x[c, (b*s+h+kh-1)*s + w+kw-1] (zero outside).
template <typename Scalar>
void im2col(const RowMatrix<Scalar>& x, std::size_t batch, std::size_t s, RowMatrix<Scalar>& cols) {
  const std::size_t channels = static_cast<std::size_t>(x.rows());
  const std::size_t plane = batch * s * s;
  cols.resize(static_cast<Eigen::Index>(channels * 9), static_cast<Eigen::Index>(plane));
  for (std::size_t c = 0; c < channels; ++c) {
    const Scalar* src = x.data() + c * plane;
    for (int kh = 0; kh < 3; ++kh)
      for (int kw = 0; kw < 3; ++kw) {
        Scalar* dst = cols.data() + ((c * 3 + kh) * 3 + kw) * plane;
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t h = 0; h < s; ++h) {
            const long hh = static_cast<long>(h) + kh - 1;
            Scalar* row = dst + (b * s + h) * s;
            if (hh < 0 || hh >= static_cast<long>(s)) {
              std::fill(row, row + s, Scalar(0));
              continue;
            }
            const Scalar* in = src + (b * s + static_cast<std::size_t>(hh)) * s;
            for (std::size_t w = 0; w < s; ++w) {
              const long ww = static_cast<long>(w) + kw - 1;
              row[w] = (ww < 0 || ww >= static_cast<long>(s)) ? Scalar(0) : in[ww];
            }
          }
      }
  }
}

template <typename Scalar>
void col2im(const RowMatrix<Scalar>& cols, std::size_t channels, std::size_t batch, std::size_t s,
            RowMatrix<Scalar>& dx) {
  const std::size_t plane = batch * s * s;
  dx.setZero(static_cast<Eigen::Index>(channels), static_cast<Eigen::Index>(plane));
  for (std::size_t c = 0; c < channels; ++c) {
    Scalar* dst = dx.data() + c * plane;
    for (int kh = 0; kh < 3; ++kh)
      for (int kw = 0; kw < 3; ++kw) {
        const Scalar* src = cols.data() + ((c * 3 + kh) * 3 + kw) * plane;
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t h = 0; h < s; ++h) {
            const long hh = static_cast<long>(h) + kh - 1;
            if (hh < 0 || hh >= static_cast<long>(s)) continue;
            const Scalar* row = src + (b * s + h) * s;
            Scalar* out = dst + (b * s + static_cast<std::size_t>(hh)) * s;
            for (std::size_t w = 0; w < s; ++w) {
              const long ww = static_cast<long>(w) + kw - 1;
              if (ww >= 0 && ww < static_cast<long>(s)) out[ww] += row[w];
            }
          }
      }
  }
}

// 2x2 stride-2 max pooling with ceil output size; argmax holds the input
// column of each pooled element.
template <typename Scalar>
void maxpool(const RowMatrix<Scalar>& x, std::size_t batch, std::size_t s, RowMatrix<Scalar>& y,
             std::vector<std::uint32_t>& argmax) {
  const std::size_t p = (s + 1) / 2;
  const std::size_t channels = static_cast<std::size_t>(x.rows());
  const std::size_t in_plane = batch * s * s, out_plane = batch * p * p;
  y.resize(static_cast<Eigen::Index>(channels), static_cast<Eigen::Index>(out_plane));
  argmax.resize(channels * out_plane);
  for (std::size_t c = 0; c < channels; ++c) {
    const Scalar* src = x.data() + c * in_plane;
    Scalar* dst = y.data() + c * out_plane;
    std::uint32_t* arg = argmax.data() + c * out_plane;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t h = 0; h < p; ++h)
        for (std::size_t w = 0; w < p; ++w) {
          std::size_t best = (b * s + 2 * h) * s + 2 * w;
          for (std::size_t dh = 0; dh < 2; ++dh)
            for (std::size_t dw = 0; dw < 2; ++dw) {
              const std::size_t hh = 2 * h + dh, ww = 2 * w + dw;
              if (hh >= s || ww >= s) continue;
              const std::size_t idx = (b * s + hh) * s + ww;
              if (src[idx] > src[best]) best = idx;
            }
          const std::size_t o = (b * p + h) * p + w;
          dst[o] = src[best];
          arg[o] = static_cast<std::uint32_t>(best);
        }
  }
}

}  // namespace

template <typename Scalar>
void Network<Scalar>::layout() {
  spec_.validate();
  conv_.clear();
  const auto chain = spec_.spatial_chain();
  std::size_t offset = 0, in = spec_.channels;
  for (std::size_t i = 0; i < spec_.conv_widths.size(); ++i) {
    const std::size_t out = spec_.conv_widths[i];
    conv_.push_back(ConvSlot{in, out, chain[i], offset, offset + out * in * 9});
    offset += out * in * 9 + out;
    in = out;
  }
  head_weights_ = offset;
  head_bias_ = offset + spec_.outputs * spec_.flattened();
  params_.assign(head_bias_ + spec_.outputs, Scalar(0));
}

template <typename Scalar>
Network<Scalar> Network<Scalar>::zeros(const ArchSpec& spec) {
  Network net;
  net.spec_ = spec;
  net.layout();
  return net;
}

template <typename Scalar>
Network<Scalar> Network<Scalar>::init(const ArchSpec& spec, std::uint64_t seed) {
  Network net = zeros(spec);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const auto& c : net.conv_) {
    const double scale = std::sqrt(2.0 / static_cast<double>(c.in * 9));
    for (std::size_t i = c.weights; i < c.bias; ++i) net.params_[i] = static_cast<Scalar>(scale * normal(rng));
  }
  const double head_scale = std::sqrt(1.0 / static_cast<double>(spec.flattened()));
  for (std::size_t i = net.head_weights_; i < net.head_bias_; ++i)
    net.params_[i] = static_cast<Scalar>(head_scale * normal(rng));
  return net;
}

template <typename Scalar>
template <typename Other>
Network<Other> Network<Scalar>::cast() const {
  Network<Other> out = Network<Other>::zeros(spec_);
  std::transform(params_.begin(), params_.end(), out.params_.begin(), [](Scalar v) { return static_cast<Other>(v); });
  return out;
}

template <typename Scalar>
void Network<Scalar>::forward(std::span<const Scalar> input, std::size_t batch, std::span<Scalar> output,
                              Workspace<Scalar>& ws) const {
  if (batch == 0) throw std::invalid_argument("forward: empty batch");
  if (input.size() != batch * spec_.input_size())
    throw std::invalid_argument("forward: input size does not match the architecture");
  if (output.size() != batch * spec_.outputs) throw std::invalid_argument("forward: output size mismatch");

  const std::size_t blocks = conv_.size();
  ws.columns.resize(blocks);
  ws.activated.resize(blocks);
  ws.pooled.resize(blocks);
  ws.argmax.resize(blocks);

  // Sample-major (B, C, S, S) -> channel-major (C, B, S, S).
  const std::size_t s0 = spec_.height, plane0 = s0 * s0;
  RowMatrix<Scalar> x(static_cast<Eigen::Index>(spec_.channels), static_cast<Eigen::Index>(batch * plane0));
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < spec_.channels; ++c)
      std::copy_n(input.data() + (b * spec_.channels + c) * plane0, plane0, x.data() + (c * batch + b) * plane0);

  const RowMatrix<Scalar>* current = &x;
  for (std::size_t i = 0; i < blocks; ++i) {
    const ConvSlot& c = conv_[i];
    im2col(*current, batch, c.size, ws.columns[i]);
    ConstRowMap<Scalar> weights(params_.data() + c.weights, static_cast<Eigen::Index>(c.out),
                                static_cast<Eigen::Index>(c.in * 9));
    Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> bias(params_.data() + c.bias,
                                                                    static_cast<Eigen::Index>(c.out));
    auto& act = ws.activated[i];
    // Per-sample products keep each sample's result independent of the batch.
    const auto plane_i = static_cast<Eigen::Index>(c.size * c.size);
    act.resize(static_cast<Eigen::Index>(c.out), static_cast<Eigen::Index>(batch) * plane_i);
    for (std::size_t b = 0; b < batch; ++b)
      act.middleCols(static_cast<Eigen::Index>(b) * plane_i, plane_i).noalias() =
          weights * ws.columns[i].middleCols(static_cast<Eigen::Index>(b) * plane_i, plane_i);
    act.colwise() += bias;
    act = act.cwiseMax(Scalar(0));
    maxpool(act, batch, c.size, ws.pooled[i], ws.argmax[i]);
    current = &ws.pooled[i];
  }

  // Flatten per sample: feature (c, h, w) of sample b.
  const std::size_t s_last = spec_.spatial_chain().back(), plane = s_last * s_last;
  const std::size_t feat = spec_.flattened();
  const std::size_t last_channels = static_cast<std::size_t>(current->rows());
  ws.flat.resize(static_cast<Eigen::Index>(feat), static_cast<Eigen::Index>(batch));
  for (std::size_t c = 0; c < last_channels; ++c)
    for (std::size_t b = 0; b < batch; ++b)
      std::copy_n(current->data() + (c * batch + b) * plane, plane, ws.flat.data() + b * feat + c * plane);

  ConstRowMap<Scalar> head(params_.data() + head_weights_, static_cast<Eigen::Index>(spec_.outputs),
                           static_cast<Eigen::Index>(feat));
  Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> head_bias(params_.data() + head_bias_,
                                                                       static_cast<Eigen::Index>(spec_.outputs));
  ws.output.resize(static_cast<Eigen::Index>(spec_.outputs), static_cast<Eigen::Index>(batch));
  for (std::size_t b = 0; b < batch; ++b)
    ws.output.col(static_cast<Eigen::Index>(b)).noalias() = head * ws.flat.col(static_cast<Eigen::Index>(b));
  ws.output.colwise() += head_bias;
  std::copy_n(ws.output.data(), batch * spec_.outputs, output.data());
}

template <typename Scalar>
std::vector<Scalar> Network<Scalar>::forward(std::span<const Scalar> input, std::size_t batch) const {
  Workspace<Scalar> ws;
  std::vector<Scalar> out(batch * spec_.outputs);
  forward(input, batch, out, ws);
  return out;
}

template <typename Scalar>
Scalar Network<Scalar>::loss_and_grads(std::span<const Scalar> input, std::span<const Scalar> targets,
                                       std::size_t batch, Vector& grads, Workspace<Scalar>& ws) const {
  if (targets.size() != batch * spec_.outputs) throw std::invalid_argument("loss: target size mismatch");
  std::vector<Scalar> pred(batch * spec_.outputs);
  forward(input, batch, pred, ws);

  grads.assign(params_.size(), Scalar(0));
  const Scalar scale = Scalar(2) / static_cast<Scalar>(batch * spec_.outputs);
  ColMatrix<Scalar> d_out(static_cast<Eigen::Index>(spec_.outputs), static_cast<Eigen::Index>(batch));
  Scalar loss = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const Scalar e = pred[i] - targets[i];
    loss += e * e;
    d_out.data()[i] = scale * e;
  }
  loss /= static_cast<Scalar>(batch * spec_.outputs);

  const std::size_t feat = spec_.flattened();
  ConstRowMap<Scalar> head(params_.data() + head_weights_, static_cast<Eigen::Index>(spec_.outputs),
                           static_cast<Eigen::Index>(feat));
  RowMap<Scalar>(grads.data() + head_weights_, static_cast<Eigen::Index>(spec_.outputs),
                 static_cast<Eigen::Index>(feat))
      .noalias() = d_out * ws.flat.transpose();
  Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(grads.data() + head_bias_,
                                                       static_cast<Eigen::Index>(spec_.outputs)) =
      d_out.rowwise().sum();
  const ColMatrix<Scalar> d_flat = head.transpose() * d_out;

  // Unflatten into channel-major pooled gradient of the last block.
  const std::size_t s_last = spec_.spatial_chain().back(), plane = s_last * s_last;
  const std::size_t blocks = conv_.size();
  const std::size_t last_channels = blocks ? conv_.back().out : spec_.channels;
  RowMatrix<Scalar> d_pooled(static_cast<Eigen::Index>(last_channels), static_cast<Eigen::Index>(batch * plane));
  for (std::size_t c = 0; c < last_channels; ++c)
    for (std::size_t b = 0; b < batch; ++b)
      std::copy_n(d_flat.data() + b * feat + c * plane, plane, d_pooled.data() + (c * batch + b) * plane);

  RowMatrix<Scalar> d_act, d_cols;
  for (std::size_t i = blocks; i-- > 0;) {
    const ConvSlot& c = conv_[i];
    const auto& act = ws.activated[i];
    d_act.setZero(act.rows(), act.cols());
    const std::size_t in_plane = static_cast<std::size_t>(act.cols());
    const std::size_t out_plane = static_cast<std::size_t>(d_pooled.cols());
    for (std::size_t ch = 0; ch < c.out; ++ch) {
      const std::uint32_t* arg = ws.argmax[i].data() + ch * out_plane;
      const Scalar* g = d_pooled.data() + ch * out_plane;
      Scalar* dst = d_act.data() + ch * in_plane;
      for (std::size_t o = 0; o < out_plane; ++o) dst[arg[o]] += g[o];
    }
    d_act = (act.array() > Scalar(0)).select(d_act, Scalar(0));

    RowMap<Scalar>(grads.data() + c.weights, static_cast<Eigen::Index>(c.out), static_cast<Eigen::Index>(c.in * 9))
        .noalias() = d_act * ws.columns[i].transpose();
    Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(grads.data() + c.bias, static_cast<Eigen::Index>(c.out)) =
        d_act.rowwise().sum();
    if (i == 0) break;
    ConstRowMap<Scalar> weights(params_.data() + c.weights, static_cast<Eigen::Index>(c.out),
                                static_cast<Eigen::Index>(c.in * 9));
    d_cols.noalias() = weights.transpose() * d_act;
    col2im(d_cols, c.in, batch, c.size, d_pooled);
  }
  return loss;
}

template class Network<float>;
template class Network<double>;
template Network<double> Network<float>::cast<double>() const;
template Network<float> Network<double>::cast<float>() const;

// ---------------------------------------------------------------------------
// Training

namespace {

void gather(const TrainingSet& set, std::span<const std::size_t> rows, std::size_t in_width, std::size_t out_width,
            std::vector<float>& images, std::vector<float>& targets) {
  images.resize(rows.size() * in_width);
  targets.resize(rows.size() * out_width);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(set.images.data() + rows[i] * in_width, in_width, images.data() + i * in_width);
    std::copy_n(set.targets.data() + rows[i] * out_width, out_width, targets.data() + i * out_width);
  }
}

void check_set(const Network<float>& net, const TrainingSet& set) {
  if (set.images.size() != set.count * net.spec().input_size() || set.targets.size() != set.count * net.spec().outputs)
    throw std::invalid_argument("training set does not match the architecture");
}

}  // namespace

double evaluate_loss(const Network<float>& net, const TrainingSet& set, std::size_t batch_size) {
  check_set(net, set);
  if (set.count == 0) return std::numeric_limits<double>::quiet_NaN();
  const auto pred = predict(net, set.images, set.count, batch_size);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = static_cast<double>(pred[i]) - static_cast<double>(set.targets[i]);
    sum += e * e;
  }
  return sum / static_cast<double>(pred.size());
}

std::vector<float> predict(const Network<float>& net, std::span<const float> images, std::size_t count,
                           std::size_t batch_size) {
  const std::size_t in = net.spec().input_size(), out = net.spec().outputs;
  if (images.size() != count * in) throw std::invalid_argument("predict: image size mismatch");
  std::vector<float> pred(count * out);
  Workspace<float> ws;
  for (std::size_t start = 0; start < count; start += batch_size) {
    const std::size_t n = std::min(batch_size, count - start);
    net.forward(images.subspan(start * in, n * in), n, std::span<float>(pred).subspan(start * out, n * out), ws);
  }
  return pred;
}

TrainResult train(Network<float> net, const TrainingSet& train_set, const TrainingSet& validation,
                  const TrainSchedule& schedule, const EpochCallback& on_epoch) {
  check_set(net, train_set);
  check_set(net, validation);
  if (train_set.count == 0) throw std::invalid_argument("train: empty training set");
  if (schedule.batch_size == 0) throw std::invalid_argument("train: batch size must be positive");

  const std::size_t in = net.spec().input_size(), out = net.spec().outputs;
  std::vector<float> velocity(net.parameter_count(), 0.0f), grads, images, targets;
  std::vector<std::size_t> order(train_set.count);
  Workspace<float> ws;

  TrainResult result;
  result.best = net;
  double best_score = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 0; epoch < schedule.epochs; ++epoch) {
    const double lr = schedule.learning_rate *
                      std::pow(schedule.lr_drop_factor,
                               static_cast<double>(schedule.lr_drop_every ? epoch / schedule.lr_drop_every : 0));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::seed_seq seq{static_cast<std::uint32_t>(schedule.shuffle_seed),
                      static_cast<std::uint32_t>(schedule.shuffle_seed >> 32), static_cast<std::uint32_t>(epoch)};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);

    const float lr_f = static_cast<float>(lr), mu = static_cast<float>(schedule.momentum);
    const float wd = static_cast<float>(schedule.weight_decay);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += schedule.batch_size) {
      const std::size_t n = std::min(schedule.batch_size, order.size() - start);
      gather(train_set, std::span<const std::size_t>(order).subspan(start, n), in, out, images, targets);
      const float loss = net.loss_and_grads(images, targets, n, grads, ws);
      if (!std::isfinite(loss))
        throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch + 1) + " (non-finite loss)");
      epoch_loss += static_cast<double>(loss) * static_cast<double>(n);
      auto& w = net.parameters();
      for (std::size_t k = 0; k < w.size(); ++k) {
        velocity[k] = mu * velocity[k] - lr_f * (grads[k] + wd * w[k]);
        w[k] += velocity[k];
      }
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.learning_rate = lr;
    rec.train_loss = epoch_loss / static_cast<double>(order.size());
    rec.validation_loss = validation.count ? evaluate_loss(net, validation) : std::numeric_limits<double>::quiet_NaN();
    if (validation.count && !std::isfinite(rec.validation_loss))
      throw TrainingDiverged("validation loss became non-finite at epoch " + std::to_string(rec.epoch));
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    const double score = validation.count ? rec.validation_loss : rec.train_loss;
    if (score < best_score) {
      best_score = score;
      result.best = net;
      result.best_epoch = rec.epoch;
    }
  }
  if (schedule.epochs == 0) result.best = net;
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kCheckpointMagic[4] = {'P', 'C', 'N', 'N'};

FloatTensor vector_tensor(const std::vector<double>& v) {
  FloatTensor t{{v.size()}, {}};
  for (double x : v) t.data.push_back(static_cast<float>(x));
  return t;
}

std::vector<double> tensor_vector(const FloatTensor& t) { return {t.data.begin(), t.data.end()}; }

}  // namespace

void save_model(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(kCheckpointMagic, 4);
  write_u32(out, kCheckpointVersion);
  write_u32(out, model.kind == ModelKind::Modular ? 0u : 1u);
  const ArchSpec& s = model.network.spec();
  write_u64(out, s.height);
  write_u64(out, s.width);
  write_u64(out, s.channels);
  write_u64(out, s.outputs);
  write_u64(out, s.conv_widths.size());
  for (auto w : s.conv_widths) write_u64(out, w);
  write_u64(out, model.best_epoch);

  write_tensor(out, FloatTensor{{model.network.parameter_count()}, model.network.parameters()});
  write_u32(out, model.image_stats.mode() == ScaleMode::Variance ? 0u : 1u);
  write_u32(out, model.target_stats.mode() == ScaleMode::Variance ? 0u : 1u);
  write_tensor(out, vector_tensor(model.image_stats.mean()));
  write_tensor(out, vector_tensor(model.image_stats.variance()));
  write_tensor(out, vector_tensor(model.target_stats.mean()));
  write_tensor(out, vector_tensor(model.target_stats.variance()));
  FloatTensor history{{model.history.size(), 4}, {}};
  for (const auto& h : model.history)
    for (double v : {static_cast<double>(h.epoch), h.learning_rate, h.train_loss, h.validation_loss})
      history.data.push_back(static_cast<float>(v));
  write_tensor(out, history);
  if (!out) throw FormatError("failed writing checkpoint " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) throw FormatError("not a PCNN checkpoint");
  if (read_u32(in) != kCheckpointVersion) throw FormatError("unsupported checkpoint version");
  Model model;
  model.kind = read_u32(in) == 0 ? ModelKind::Modular : ModelKind::Monolithic;
  ArchSpec s;
  s.height = read_u64(in);
  s.width = read_u64(in);
  s.channels = read_u64(in);
  s.outputs = read_u64(in);
  s.conv_widths.resize(read_u64(in));
  for (auto& w : s.conv_widths) w = read_u64(in);
  model.best_epoch = read_u64(in);
  model.network = Network<float>::zeros(s);
  const FloatTensor params = read_tensor(in);
  if (params.data.size() != model.network.parameter_count()) throw FormatError("checkpoint parameter count mismatch");
  model.network.parameters() = params.data;
  const ScaleMode image_mode = read_u32(in) == 0 ? ScaleMode::Variance : ScaleMode::StdDev;
  const ScaleMode target_mode = read_u32(in) == 0 ? ScaleMode::Variance : ScaleMode::StdDev;
  const auto im = tensor_vector(read_tensor(in));
  const auto iv = tensor_vector(read_tensor(in));
  const auto tm = tensor_vector(read_tensor(in));
  const auto tv = tensor_vector(read_tensor(in));
  model.image_stats = Standardizer(im, iv, image_mode);
  model.target_stats = Standardizer(tm, tv, target_mode);
  const FloatTensor history = read_tensor(in);
  for (std::size_t r = 0; r < (history.dims.empty() ? 0 : history.dims[0]); ++r) {
    const float* h = history.data.data() + r * 4;
    model.history.push_back(EpochRecord{static_cast<std::size_t>(h[0]), h[1], h[2], h[3]});
  }
  return model;
}

}  // namespace posture::nn
