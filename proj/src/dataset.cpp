#include "atomcast/dataset.hpp"

#include <cmath>
#include <string>

namespace atomcast {

std::vector<WindowSample> make_windows(const Trajectory& traj, const WindowSpec& spec) {
    if (spec.history < 1 || spec.horizon < 1 || spec.stride < 1) {
        throw InvalidConfig("window spec requires H >= 1, L >= 1, stride >= 1");
    }
    const std::size_t t_total = traj.n_frames();
    const auto h = static_cast<std::size_t>(spec.history);
    const auto l = static_cast<std::size_t>(spec.horizon);
    if (t_total < h + l + 1) {
        throw TrajectoryTooShort("need at least H + L + 1 = " + std::to_string(h + l + 1) +
                                 " frames for windowing, got " + std::to_string(t_total));
    }
    const std::size_t n = traj.n_atoms();
    const auto stride = static_cast<std::size_t>(spec.stride);
    const std::size_t count = (t_total - h - l) / stride + 1;

    std::vector<WindowSample> out;
    out.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
        const std::size_t start = w * stride;
        WindowSample sample;
        sample.start_frame = start;
        sample.features = Mat(h, 6 * n);
        sample.targets = Mat(l, 3 * n);

        for (std::size_t row = 0; row < h; ++row) {
            const std::size_t g = start + row;
            double* f = sample.features.row(row);
            for (std::size_t i = 0; i < n; ++i) {
                const Vec3& p = traj.position(g, i);
                // lagged displacement; zero for the first trajectory step
                const Vec3 d = g == 0 ? Vec3{} : p - traj.position(g - 1, i);
                f[6 * i + 0] = p.x;
                f[6 * i + 1] = p.y;
                f[6 * i + 2] = p.z;
                f[6 * i + 3] = d.x;
                f[6 * i + 4] = d.y;
                f[6 * i + 5] = d.z;
            }
        }

        const std::size_t anchor = start + h - 1; // last history frame
        for (std::size_t row = 0; row < l; ++row) {
            const std::size_t g = anchor + row;
            double* t = sample.targets.row(row);
            for (std::size_t i = 0; i < n; ++i) {
                const Vec3 d = traj.position(g + 1, i) - traj.position(g, i);
                t[3 * i + 0] = d.x;
                t[3 * i + 1] = d.y;
                t[3 * i + 2] = d.z;
            }
        }

        sample.base_positions = traj.frame(anchor).positions;
        out.push_back(std::move(sample));
    }
    return out;
}

Normalizer::Normalizer(std::vector<double> mean, std::vector<double> sigma)
    : feature_mean_(std::move(mean)), feature_sigma_(std::move(sigma)) {
    if (feature_mean_.size() != feature_sigma_.size() || feature_mean_.size() % 6 != 0) {
        throw ShapeMismatch("normalizer statistics must come in 6N-sized vectors");
    }
    for (double& s : feature_sigma_) s = std::max(s, 1e-8);
}

Normalizer Normalizer::identity(std::size_t n_atoms) {
    return Normalizer(std::vector<double>(6 * n_atoms, 0.0), std::vector<double>(6 * n_atoms, 1.0));
}

Normalizer Normalizer::fit(const std::vector<WindowSample>& train_windows) {
    if (train_windows.empty()) throw EmptyInput("fit_normalizer needs at least one window");
    const std::size_t cols = train_windows.front().features.cols;

    std::vector<double> mean(cols, 0.0);
    std::vector<double> m2(cols, 0.0);
    std::size_t count = 0;
    for (const auto& w : train_windows) {
        if (w.features.cols != cols) throw ShapeMismatch("inconsistent feature width across windows");
        for (std::size_t r = 0; r < w.features.rows; ++r) {
            const double* row = w.features.row(r);
            ++count;
            for (std::size_t c = 0; c < cols; ++c) {
                // Welford update
                const double delta = row[c] - mean[c];
                mean[c] += delta / static_cast<double>(count);
                m2[c] += delta * (row[c] - mean[c]);
            }
        }
    }
    std::vector<double> sigma(cols, 0.0);
    for (std::size_t c = 0; c < cols; ++c) {
        sigma[c] = count > 1 ? std::sqrt(m2[c] / static_cast<double>(count)) : 0.0;
    }
    return Normalizer(std::move(mean), std::move(sigma));
}

Mat Normalizer::apply_features(const Mat& features) const {
    if (features.cols != feature_mean_.size()) {
        throw ShapeMismatch("feature width " + std::to_string(features.cols) +
                            " does not match normalizer width " + std::to_string(feature_mean_.size()));
    }
    Mat out = features;
    for (std::size_t r = 0; r < out.rows; ++r) {
        double* row = out.row(r);
        for (std::size_t c = 0; c < out.cols; ++c) {
            row[c] = (row[c] - feature_mean_[c]) / feature_sigma_[c];
        }
    }
    return out;
}

double Normalizer::target_mean(std::size_t c) const {
    const std::size_t atom = c / 3;
    const std::size_t axis = c % 3;
    return feature_mean_[6 * atom + 3 + axis];
}

double Normalizer::target_sigma(std::size_t c) const {
    const std::size_t atom = c / 3;
    const std::size_t axis = c % 3;
    return feature_sigma_[6 * atom + 3 + axis];
}

Mat Normalizer::apply_targets(const Mat& targets) const {
    if (targets.cols * 2 != feature_mean_.size()) {
        throw ShapeMismatch("target width " + std::to_string(targets.cols) +
                            " does not match normalizer atoms");
    }
    Mat out = targets;
    for (std::size_t r = 0; r < out.rows; ++r) {
        double* row = out.row(r);
        for (std::size_t c = 0; c < out.cols; ++c) {
            row[c] = (row[c] - target_mean(c)) / target_sigma(c);
        }
    }
    return out;
}

Mat Normalizer::invert_targets(const Mat& normalized) const {
    if (normalized.cols * 2 != feature_mean_.size()) {
        throw ShapeMismatch("target width " + std::to_string(normalized.cols) +
                            " does not match normalizer atoms");
    }
    Mat out = normalized;
    for (std::size_t r = 0; r < out.rows; ++r) {
        double* row = out.row(r);
        for (std::size_t c = 0; c < out.cols; ++c) {
            row[c] = row[c] * target_sigma(c) + target_mean(c);
        }
    }
    return out;
}

std::vector<WindowSample> normalize_windows(const std::vector<WindowSample>& windows,
                                            const Normalizer& norm) {
    std::vector<WindowSample> out;
    out.reserve(windows.size());
    for (const auto& w : windows) {
        WindowSample s;
        s.features = norm.apply_features(w.features);
        s.targets = norm.apply_targets(w.targets);
        s.base_positions = w.base_positions;
        s.start_frame = w.start_frame;
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace atomcast
