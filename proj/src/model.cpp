#include "atomcast/model.hpp"

#include <cmath>

#include "atomcast/errors.hpp"
#include "atomcast/rng.hpp"

namespace atomcast {

namespace {

// tanh-form gelu
double gelu(double x) {
    const double k = 0.7978845608028654; // sqrt(2/pi)
    const double g = k * (x + 0.044715 * x * x * x);
    return 0.5 * x * (1.0 + std::tanh(g));
}

double gelu_derivative(double x) {
    const double k = 0.7978845608028654;
    const double g = k * (x + 0.044715 * x * x * x);
    const double t = std::tanh(g);
    const double dg = k * (1.0 + 3.0 * 0.044715 * x * x);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dg;
}

// y += W x (W stored row-major out x in)
void gemv(const double* w, const double* x, double* y, std::size_t out, std::size_t in) {
    for (std::size_t o = 0; o < out; ++o) {
        const double* wrow = w + o * in;
        double acc = 0.0;
        for (std::size_t i = 0; i < in; ++i) acc += wrow[i] * x[i];
        y[o] += acc;
    }
}

// x_grad += W^T y_grad
void gemv_transposed(const double* w, const double* y_grad, double* x_grad, std::size_t out,
                     std::size_t in) {
    for (std::size_t o = 0; o < out; ++o) {
        const double* wrow = w + o * in;
        const double g = y_grad[o];
        if (g == 0.0) continue;
        for (std::size_t i = 0; i < in; ++i) x_grad[i] += wrow[i] * g;
    }
}

// w_grad += y_grad (outer) x
void accumulate_outer(const double* y_grad, const double* x, double* w_grad, std::size_t out,
                      std::size_t in) {
    for (std::size_t o = 0; o < out; ++o) {
        double* grow = w_grad + o * in;
        const double g = y_grad[o];
        if (g == 0.0) continue;
        for (std::size_t i = 0; i < in; ++i) grow[i] += g * x[i];
    }
}

std::vector<std::pair<std::size_t, std::size_t>> mlp_layer_shapes(const Architecture& a) {
    std::vector<std::pair<std::size_t, std::size_t>> shapes; // (out, in)
    std::size_t prev = a.in_dim();
    for (const int h : a.hidden) {
        shapes.emplace_back(static_cast<std::size_t>(h), prev);
        prev = static_cast<std::size_t>(h);
    }
    shapes.emplace_back(a.out_dim(), prev);
    return shapes;
}

void validate_arch(const Architecture& a) {
    if (a.history < 1 || a.horizon < 1 || a.n_atoms < 2) {
        throw InvalidConfig("architecture requires history >= 1, horizon >= 1, n_atoms >= 2");
    }
    if (a.kind == BackboneKind::mlp) {
        if (a.hidden.empty()) throw InvalidConfig("mlp backbone needs at least one hidden width");
        for (const int h : a.hidden) {
            if (h < 1) throw InvalidConfig("mlp hidden widths must be positive");
        }
    }
    if (a.kind == BackboneKind::channel_mix && a.blocks < 1) {
        throw InvalidConfig("channel_mix backbone needs blocks >= 1");
    }
}

} // namespace

BackboneKind backbone_from_string(const std::string& name) {
    if (name == "linear") return BackboneKind::linear;
    if (name == "mlp") return BackboneKind::mlp;
    if (name == "channel_mix") return BackboneKind::channel_mix;
    throw InvalidConfig("unknown backbone '" + name + "' (expected linear, mlp or channel_mix)");
}

std::string backbone_to_string(BackboneKind kind) {
    switch (kind) {
        case BackboneKind::linear: return "linear";
        case BackboneKind::mlp: return "mlp";
        case BackboneKind::channel_mix: return "channel_mix";
    }
    return "unknown";
}

std::size_t param_count(const Architecture& a) {
    validate_arch(a);
    switch (a.kind) {
        case BackboneKind::linear:
            return a.out_dim() * a.in_dim() + a.out_dim();
        case BackboneKind::mlp: {
            std::size_t total = 0;
            for (const auto& [out, in] : mlp_layer_shapes(a)) total += out * in + out;
            return total;
        }
        case BackboneKind::channel_mix: {
            const auto h = static_cast<std::size_t>(a.history);
            const std::size_t c = a.channels();
            const std::size_t per_block = h * h + h + c * c + c;
            return static_cast<std::size_t>(a.blocks) * per_block + a.out_dim() * (h * c) + a.out_dim();
        }
    }
    throw InvalidConfig("unreachable backbone kind");
}

Model make_model(const Architecture& arch, std::uint64_t seed) {
    validate_arch(arch);
    Model m;
    m.arch = arch;
    m.params.assign(param_count(arch), 0.0);
    RngStream rng(derive_seed(seed, "model.init"));

    auto fill_glorot = [&rng](double* w, std::size_t out, std::size_t in) {
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        for (std::size_t k = 0; k < out * in; ++k) w[k] = rng.uniform(-limit, limit);
    };

    double* p = m.params.data();
    switch (arch.kind) {
        case BackboneKind::linear: {
            fill_glorot(p, arch.out_dim(), arch.in_dim());
            break; // bias stays zero
        }
        case BackboneKind::mlp: {
            for (const auto& [out, in] : mlp_layer_shapes(arch)) {
                fill_glorot(p, out, in);
                p += out * in + out;
            }
            break;
        }
        case BackboneKind::channel_mix: {
            const auto h = static_cast<std::size_t>(arch.history);
            const std::size_t c = arch.channels();
            for (int b = 0; b < arch.blocks; ++b) {
                fill_glorot(p, h, h);
                p += h * h + h;
                fill_glorot(p, c, c);
                p += c * c + c;
            }
            fill_glorot(p, arch.out_dim(), h * c);
            break;
        }
    }
    return m;
}

namespace {

void check_input(const Model& m, const Mat& x) {
    const auto h = static_cast<std::size_t>(m.arch.history);
    if (x.rows != h || x.cols != m.arch.channels()) {
        throw ShapeMismatch("expected features " + std::to_string(h) + "x" +
                            std::to_string(m.arch.channels()) + ", got " + std::to_string(x.rows) +
                            "x" + std::to_string(x.cols));
    }
    if (m.params.size() != param_count(m.arch)) {
        throw ShapeMismatch("parameter vector size " + std::to_string(m.params.size()) +
                            " does not match architecture (" + std::to_string(param_count(m.arch)) + ")");
    }
}

Mat reshape_output(const Model& m, std::vector<double>&& flat) {
    Mat y(static_cast<std::size_t>(m.arch.horizon), 3 * static_cast<std::size_t>(m.arch.n_atoms));
    y.data = std::move(flat);
    return y;
}

Mat forward_impl(const Model& m, const Mat& x, ForwardTrace* trace) {
    check_input(m, x);
    const Architecture& a = m.arch;
    const double* p = m.params.data();

    switch (a.kind) {
        case BackboneKind::linear: {
            std::vector<double> y(a.out_dim());
            const double* w = p;
            const double* b = p + a.out_dim() * a.in_dim();
            for (std::size_t o = 0; o < a.out_dim(); ++o) y[o] = b[o];
            gemv(w, x.data.data(), y.data(), a.out_dim(), a.in_dim());
            return reshape_output(m, std::move(y));
        }
        case BackboneKind::mlp: {
            const auto shapes = mlp_layer_shapes(a);
            std::vector<double> act = x.data;
            if (trace) {
                trace->layer_pre.clear();
                trace->layer_post.clear();
            }
            for (std::size_t layer = 0; layer < shapes.size(); ++layer) {
                const auto [out, in] = shapes[layer];
                std::vector<double> z(out);
                const double* b = p + out * in;
                for (std::size_t o = 0; o < out; ++o) z[o] = b[o];
                gemv(p, act.data(), z.data(), out, in);
                p += out * in + out;
                const bool last = layer + 1 == shapes.size();
                if (trace) trace->layer_pre.push_back(z);
                if (!last) {
                    for (double& v : z) v = gelu(v);
                }
                if (trace) trace->layer_post.push_back(z);
                act = std::move(z);
            }
            return reshape_output(m, std::move(act));
        }
        case BackboneKind::channel_mix: {
            const auto h = static_cast<std::size_t>(a.history);
            const std::size_t c = a.channels();
            Mat state = x;
            if (trace) {
                trace->block_input.clear();
                trace->block_time_pre.clear();
                trace->block_mid.clear();
                trace->block_channel_pre.clear();
            }
            for (int blk = 0; blk < a.blocks; ++blk) {
                const double* wt = p;
                const double* bt = p + h * h;
                const double* wc = bt + h;
                const double* bc = wc + c * c;
                p = bc + c;

                if (trace) trace->block_input.push_back(state);
                // time mixing: each channel column through the same H x H map
                Mat zt(h, c);
                for (std::size_t r = 0; r < h; ++r) {
                    for (std::size_t col = 0; col < c; ++col) {
                        double acc = bt[r];
                        const double* wrow = wt + r * h;
                        for (std::size_t s = 0; s < h; ++s) acc += wrow[s] * state.at(s, col);
                        zt.at(r, col) = acc;
                    }
                }
                if (trace) trace->block_time_pre.push_back(zt);
                Mat mid = state;
                for (std::size_t k = 0; k < mid.size(); ++k) mid.data[k] += gelu(zt.data[k]);
                if (trace) trace->block_mid.push_back(mid);

                // channel mixing: each step row through the same C x C map
                Mat zc(h, c);
                for (std::size_t r = 0; r < h; ++r) {
                    const double* mrow = mid.row(r);
                    double* zrow = zc.row(r);
                    for (std::size_t col = 0; col < c; ++col) zrow[col] = bc[col];
                    gemv(wc, mrow, zrow, c, c);
                }
                if (trace) trace->block_channel_pre.push_back(zc);
                state = mid;
                for (std::size_t k = 0; k < state.size(); ++k) state.data[k] += gelu(zc.data[k]);
            }
            if (trace) trace->final_state = state;

            const double* wh = p;
            const double* bh = p + a.out_dim() * (h * c);
            std::vector<double> y(a.out_dim());
            for (std::size_t o = 0; o < a.out_dim(); ++o) y[o] = bh[o];
            gemv(wh, state.data.data(), y.data(), a.out_dim(), h * c);
            return reshape_output(m, std::move(y));
        }
    }
    throw InvalidConfig("unreachable backbone kind");
}

} // namespace

Mat forward(const Model& model, const Mat& features) {
    return forward_impl(model, features, nullptr);
}

Mat forward(const Model& model, const Mat& features, ForwardTrace& trace) {
    return forward_impl(model, features, &trace);
}

void backward(const Model& m, const Mat& x, const ForwardTrace& trace, const Mat& grad_out,
              std::vector<double>& grad_params) {
    check_input(m, x);
    const Architecture& a = m.arch;
    if (grad_out.size() != a.out_dim()) {
        throw ShapeMismatch("gradient shape does not match model output");
    }
    if (grad_params.size() != m.params.size()) {
        throw ShapeMismatch("grad_params size does not match parameter count");
    }
    const double* p = m.params.data();
    double* g = grad_params.data();

    switch (a.kind) {
        case BackboneKind::linear: {
            accumulate_outer(grad_out.data.data(), x.data.data(), g, a.out_dim(), a.in_dim());
            double* gb = g + a.out_dim() * a.in_dim();
            for (std::size_t o = 0; o < a.out_dim(); ++o) gb[o] += grad_out.data[o];
            return;
        }
        case BackboneKind::mlp: {
            const auto shapes = mlp_layer_shapes(a);
            if (trace.layer_pre.size() != shapes.size()) {
                throw ShapeMismatch("forward trace does not match mlp depth");
            }
            // parameter offsets per layer
            std::vector<std::size_t> offsets(shapes.size());
            std::size_t off = 0;
            for (std::size_t layer = 0; layer < shapes.size(); ++layer) {
                offsets[layer] = off;
                off += shapes[layer].first * shapes[layer].second + shapes[layer].first;
            }

            std::vector<double> delta = grad_out.data; // d loss / d z_last (linear output layer)
            for (std::size_t layer = shapes.size(); layer-- > 0;) {
                const auto [out, in] = shapes[layer];
                const double* input =
                    layer == 0 ? x.data.data() : trace.layer_post[layer - 1].data();
                accumulate_outer(delta.data(), input, g + offsets[layer], out, in);
                double* gb = g + offsets[layer] + out * in;
                for (std::size_t o = 0; o < out; ++o) gb[o] += delta[o];
                if (layer == 0) break;
                std::vector<double> prev(in, 0.0);
                gemv_transposed(p + offsets[layer], delta.data(), prev.data(), out, in);
                const auto& z_prev = trace.layer_pre[layer - 1];
                for (std::size_t i = 0; i < in; ++i) prev[i] *= gelu_derivative(z_prev[i]);
                delta = std::move(prev);
            }
            return;
        }
        case BackboneKind::channel_mix: {
            const auto h = static_cast<std::size_t>(a.history);
            const std::size_t c = a.channels();
            const std::size_t per_block = h * h + h + c * c + c;
            const std::size_t head_off = static_cast<std::size_t>(a.blocks) * per_block;

            // head
            accumulate_outer(grad_out.data.data(), trace.final_state.data.data(), g + head_off,
                             a.out_dim(), h * c);
            double* gbh = g + head_off + a.out_dim() * (h * c);
            for (std::size_t o = 0; o < a.out_dim(); ++o) gbh[o] += grad_out.data[o];

            Mat gstate(h, c);
            gemv_transposed(p + head_off, grad_out.data.data(), gstate.data.data(), a.out_dim(), h * c);

            for (int blk = a.blocks; blk-- > 0;) {
                const std::size_t boff = static_cast<std::size_t>(blk) * per_block;
                const double* wt = p + boff;
                const double* wc = p + boff + h * h + h;
                double* gwt = g + boff;
                double* gbt = g + boff + h * h;
                double* gwc = g + boff + h * h + h;
                double* gbc = g + boff + h * h + h + c * c;

                const Mat& x_in = trace.block_input[static_cast<std::size_t>(blk)];
                const Mat& zt = trace.block_time_pre[static_cast<std::size_t>(blk)];
                const Mat& mid = trace.block_mid[static_cast<std::size_t>(blk)];
                const Mat& zc = trace.block_channel_pre[static_cast<std::size_t>(blk)];

                // channel-mix half: state = mid + gelu(zc), zc rows = Wc mid_row + bc
                Mat gzc(h, c);
                for (std::size_t k = 0; k < gzc.size(); ++k) {
                    gzc.data[k] = gstate.data[k] * gelu_derivative(zc.data[k]);
                }
                Mat gmid = gstate; // residual path
                for (std::size_t r = 0; r < h; ++r) {
                    accumulate_outer(gzc.row(r), mid.row(r), gwc, c, c);
                    for (std::size_t col = 0; col < c; ++col) gbc[col] += gzc.at(r, col);
                    gemv_transposed(wc, gzc.row(r), gmid.row(r), c, c);
                }

                // time-mix half: mid = x_in + gelu(zt), zt cols = Wt x_col + bt
                Mat gzt(h, c);
                for (std::size_t k = 0; k < gzt.size(); ++k) {
                    gzt.data[k] = gmid.data[k] * gelu_derivative(zt.data[k]);
                }
                Mat gx = gmid; // residual path
                for (std::size_t r = 0; r < h; ++r) {
                    double rowsum = 0.0;
                    for (std::size_t col = 0; col < c; ++col) {
                        const double gz = gzt.at(r, col);
                        rowsum += gz;
                        double* gwrow = gwt + r * h;
                        for (std::size_t s = 0; s < h; ++s) gwrow[s] += gz * x_in.at(s, col);
                    }
                    gbt[r] += rowsum;
                }
                for (std::size_t s = 0; s < h; ++s) {
                    for (std::size_t col = 0; col < c; ++col) {
                        double acc = 0.0;
                        for (std::size_t r = 0; r < h; ++r) acc += wt[r * h + s] * gzt.at(r, col);
                        gx.at(s, col) += acc;
                    }
                }
                gstate = std::move(gx);
            }
            return;
        }
    }
    throw InvalidConfig("unreachable backbone kind");
}

} // namespace atomcast
