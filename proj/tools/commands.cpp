#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <tuple>

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include "image_io.hpp"
#include "snn/filter.hpp"
#include "snn/metrics.hpp"

namespace snn::cli {
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string fmt(const char *format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

std::string fmt_psnr(double v) { return std::isinf(v) ? "inf" : fmt("%.4f", v); }

Strategy strategy_for(double offset) { return offset == 0.0 ? Strategy::nn : Strategy::snn; }

Image<double> to_rgb(const Image<double> &img) {
    if (img.channels() == 3)
        return img;
    Image<double> out(img.width(), img.height(), 3);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < 3; ++c)
                out(x, y, c) = img(x, y);
    return out;
}

Image<double> crop_even(const Image<double> &img) {
    const int w = img.width() & ~1;
    const int h = img.height() & ~1;
    if (w == img.width() && h == img.height())
        return img;
    if (w < 2 || h < 2)
        throw std::invalid_argument("image too small for a Bayer mosaic");
    Image<double> out(w, h, img.channels());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < img.channels(); ++c)
                out(x, y, c) = img(x, y, c);
    return out;
}

std::vector<fs::path> expand_images(const std::vector<fs::path> &inputs) {
    std::vector<fs::path> files;
    for (const auto &p : inputs) {
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto &e : fs::directory_iterator(p))
                if (e.is_regular_file() && io::is_image_file(e.path()))
                    found.push_back(e.path());
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else if (fs::is_regular_file(p)) {
            files.push_back(p);
        } else {
            throw io::IoError("no such file or directory '" + p.string() + "'");
        }
    }
    return files;
}

} // namespace

fs::path sigma_sidecar_path(const fs::path &output) { return output.string() + ".sigma.txt"; }

std::string csv_field(const std::string &text) {
    if (text.find_first_of(",\"\r\n") == std::string::npos)
        return text;
    std::string q = "\"";
    for (char c : text) {
        if (c == '"')
            q += '"';
        q += c;
    }
    return q + '"';
}

int cmd_denoise(const DenoiseConfig &cfg, std::ostream &out, std::ostream &err) {
    NlmParams p;
    p.patch_side = cfg.patch_side;
    p.search_side = cfg.search_side;
    p.n_neighbors = cfg.n_neighbors;
    p.offset = cfg.offset;
    p.sigma = cfg.sigma / 255.0;
    p.h = cfg.h ? *cfg.h / 255.0 : default_h(p.sigma);
    try {
        p.validate();
    } catch (const std::invalid_argument &e) {
        err << "denoise: " << e.what() << '\n';
        return kUsageError;
    }

    Image<double> noisy;
    std::optional<Image<double>> reference;
    try {
        noisy = io::read_image(cfg.input);
        if (cfg.reference) {
            reference = io::read_image(*cfg.reference);
            if (!reference->same_shape(noisy)) {
                err << "denoise: reference image shape differs from input\n";
                return kUsageError;
            }
        }
    } catch (const io::IoError &e) {
        err << "denoise: " << e.what() << '\n';
        return kUsageError;
    }

    const auto start = Clock::now();
    const Image<double> result = denoise_image(noisy, p, strategy_for(p.offset), cfg.threads);
    const double ms = elapsed_ms(start);
    try {
        io::write_image(cfg.output, result);
    } catch (const io::IoError &e) {
        err << "denoise: " << e.what() << '\n';
        return kInternalError;
    }

    out << "strategy=" << to_string(strategy_for(p.offset)) << " n_neighbors=" << p.n_neighbors
        << " offset=" << p.offset << " sigma=" << cfg.sigma << " h=" << fmt("%.4f", p.h * 255.0);
    if (reference) {
        const auto q = quality(result, *reference);
        out << " psnr=" << fmt_psnr(q.psnr) << " ssim=" << fmt("%.6f", q.ssim);
    }
    out << " wall_ms=" << fmt("%.3f", ms) << '\n';
    return kOk;
}

int cmd_add_noise(const AddNoiseConfig &cfg, std::ostream &out, std::ostream &err) {
    NoiseSpec spec{cfg.sigma, cfg.seed, cfg.domain, cfg.clip_cfa};
    try {
        spec.validate();
    } catch (const std::invalid_argument &e) {
        err << "add-noise: " << e.what() << '\n';
        return kUsageError;
    }
    Image<double> clean;
    try {
        clean = io::read_image(cfg.input);
    } catch (const io::IoError &e) {
        err << "add-noise: " << e.what() << '\n';
        return kUsageError;
    }

    try {
        if (cfg.domain == NoiseDomain::rgb_white) {
            const auto noisy = add_white_noise(clean, spec, cfg.threads);
            io::write_image(cfg.output, noisy);
            out << "domain=white sigma=" << cfg.sigma << " seed=" << cfg.seed
                << " psnr=" << fmt_psnr(psnr(noisy, clean)) << '\n';
            return kOk;
        }
        Image<double> rgb;
        try {
            rgb = crop_even(to_rgb(clean));
        } catch (const std::invalid_argument &e) {
            err << "add-noise: " << e.what() << '\n';
            return kUsageError;
        }
        const auto res = colored_noise_pipeline(rgb, spec, cfg.pattern, cfg.threads);
        io::write_image(cfg.output, res.noisy);
        const fs::path side = sigma_sidecar_path(cfg.output);
        std::ofstream s(side);
        s << "pattern=" << to_string(cfg.pattern) << "\nsigma_bayer=" << cfg.sigma
          << "\nsigma_r=" << fmt("%.6f", res.sigma.r) << "\nsigma_g=" << fmt("%.6f", res.sigma.g)
          << "\nsigma_b=" << fmt("%.6f", res.sigma.b) << "\nsigma_mean=" << fmt("%.6f", res.sigma.mean())
          << '\n';
        if (!s) {
            err << "add-noise: cannot write '" << side.string() << "'\n";
            return kInternalError;
        }
        out << "domain=bayer pattern=" << to_string(cfg.pattern) << " sigma=" << cfg.sigma
            << " seed=" << cfg.seed << " sigma_r=" << fmt("%.4f", res.sigma.r)
            << " sigma_g=" << fmt("%.4f", res.sigma.g) << " sigma_b=" << fmt("%.4f", res.sigma.b)
            << " sigma_mean=" << fmt("%.4f", res.sigma.mean()) << " psnr=" << fmt_psnr(psnr(res.noisy, rgb))
            << '\n';
        return kOk;
    } catch (const io::IoError &e) {
        err << "add-noise: " << e.what() << '\n';
        return kInternalError;
    }
}

int cmd_toy(const ToyConfig &cfg, std::ostream &out, std::ostream &err) {
    const auto &s = cfg.scenario;
    try {
        s.validate();
    } catch (const std::invalid_argument &e) {
        err << "toy: " << e.what() << '\n';
        return kUsageError;
    }
    for (Strategy st : {Strategy::nn, Strategy::snn}) {
        const auto start = Clock::now();
        const auto e = toy::prediction_error(s, st);
        out << "strategy=" << to_string(st) << " source=analytic mu=" << s.mu << " sigma=" << s.sigma
            << " n_total=" << s.n_total << " n_neighbors=" << s.n_neighbors
            << " offset=" << (st == Strategy::nn ? 0.0 : s.offset) << " bias_sq=" << fmt("%.6f", e.bias_sq)
            << " variance=" << fmt("%.6f", e.variance) << " mse=" << fmt("%.6f", e.mse)
            << " wall_ms=" << fmt("%.3f", elapsed_ms(start)) << '\n';
        if (cfg.oracle_trials > 0) {
            const auto mc_start = Clock::now();
            const auto mc = toy::mc_oracle(s, st, cfg.oracle_trials, cfg.seed, cfg.threads);
            out << "strategy=" << to_string(st) << " source=mc trials=" << mc.trials << " seed=" << cfg.seed
                << " bias_sq=" << fmt("%.6f", mc.error.bias_sq) << " variance=" << fmt("%.6f", mc.error.variance)
                << " mse=" << fmt("%.6f", mc.error.mse) << " mse_stderr=" << fmt("%.2e", mc.mse_stderr)
                << " wall_ms=" << fmt("%.3f", elapsed_ms(mc_start)) << '\n';
        }
    }
    if (cfg.curve) {
        std::ofstream csv(*cfg.curve);
        if (!csv) {
            err << "toy: cannot write '" << cfg.curve->string() << "'\n";
            return kInternalError;
        }
        csv << "mu_r,E_nn,Std_nn,E_snn,Std_snn\n";
        const double half = 5.0 * s.sigma;
        for (const auto &pt : toy::moment_curve(s, s.mu - half, s.mu + half, cfg.curve_points))
            csv << fmt("%.10g", pt.mu_r) << ',' << fmt("%.10g", pt.e_nn) << ',' << fmt("%.10g", pt.std_nn) << ','
                << fmt("%.10g", pt.e_snn) << ',' << fmt("%.10g", pt.std_snn) << '\n';
    }
    return kOk;
}

int cmd_bench(const BenchConfig &cfg, std::ostream &out, std::ostream &err) {
    std::vector<fs::path> files;
    try {
        files = expand_images(cfg.images);
    } catch (const io::IoError &e) {
        err << "bench: " << e.what() << '\n';
        return kUsageError;
    }
    if (files.empty()) {
        err << "bench: no images found\n";
        return kUsageError;
    }
    for (double o : cfg.offsets)
        if (!(o >= 0.0 && o <= 1.0)) {
            err << "bench: offsets must lie in [0, 1]\n";
            return kUsageError;
        }
    for (int n : cfg.neighbors)
        if (n < 1 || n > cfg.search_side * cfg.search_side) {
            err << "bench: neighbor counts must lie in [1, search^2]\n";
            return kUsageError;
        }

    std::ofstream file;
    if (cfg.output) {
        file.open(*cfg.output);
        if (!file) {
            err << "bench: cannot write '" << cfg.output->string() << "'\n";
            return kInternalError;
        }
    }
    std::ostream &csv = cfg.output ? static_cast<std::ostream &>(file) : out;
    csv << "image,sigma,strategy,n_neighbors,offset,psnr,ssim,wall_ms\n";

    struct Sums {
        double psnr = 0, ssim = 0, ms = 0;
        int n = 0;
    };
    // configuration -> running sums, iterated in (sigma, n, offset) order
    std::map<std::tuple<double, int, double>, Sums> aggregate;

    for (std::size_t i = 0; i < files.size(); ++i) {
        Image<double> clean;
        try {
            clean = io::read_image(files[i]);
            if (cfg.domain == NoiseDomain::bayer_colored)
                clean = crop_even(to_rgb(clean));
        } catch (const std::exception &e) {
            err << "bench: " << e.what() << '\n';
            return kUsageError;
        }
        const std::string name = files[i].stem().string();
        for (double sigma : cfg.sigmas) {
            NoiseSpec spec{sigma, mix_seed(mix_seed(cfg.seed, i), std::uint64_t(std::llround(sigma * 1000))),
                           cfg.domain, false};
            Image<double> noisy;
            double filter_sigma = sigma / 255.0;
            if (cfg.domain == NoiseDomain::rgb_white) {
                noisy = add_white_noise(clean, spec, cfg.threads);
            } else {
                auto res = colored_noise_pipeline(clean, spec, cfg.pattern, cfg.threads);
                noisy = std::move(res.noisy);
                filter_sigma = res.sigma.mean() / 255.0;
            }
            for (int n : cfg.neighbors)
                for (double o : cfg.offsets) {
                    NlmParams p;
                    p.patch_side = cfg.patch_side;
                    p.search_side = cfg.search_side;
                    p.n_neighbors = n;
                    p.offset = o;
                    p.sigma = filter_sigma;
                    p.h = cfg.h_factor * std::max(filter_sigma, 1.0 / 255.0);
                    try {
                        p.validate();
                    } catch (const std::invalid_argument &e) {
                        err << "bench: " << e.what() << '\n';
                        return kUsageError;
                    }
                    const auto start = Clock::now();
                    const auto result = denoise_image(noisy, p, strategy_for(o), cfg.threads);
                    const double ms = elapsed_ms(start);
                    const auto q = quality(result, clean);
                    csv << csv_field(name) << ',' << sigma << ',' << to_string(strategy_for(o)) << ',' << n << ','
                        << o << ',' << fmt_psnr(q.psnr) << ',' << fmt("%.6f", q.ssim) << ',' << fmt("%.3f", ms)
                        << '\n';
                    auto &a = aggregate[{sigma, n, o}];
                    a.psnr += q.psnr;
                    a.ssim += q.ssim;
                    a.ms += ms;
                    ++a.n;
                }
        }
    }
    for (const auto &[key, a] : aggregate) {
        const auto &[sigma, n, o] = key;
        csv << "mean," << sigma << ',' << to_string(strategy_for(o)) << ',' << n << ',' << o << ','
            << fmt_psnr(a.psnr / a.n) << ',' << fmt("%.6f", a.ssim / a.n) << ',' << fmt("%.3f", a.ms / a.n) << '\n';
    }
    csv.flush();
    return kOk;
}

namespace {

void add_threads(CLI::App *app, int &threads) {
    app->add_option("--threads", threads, "Worker threads (default: SNN_NLM_THREADS or all cores)")
        ->check(CLI::PositiveNumber);
}

} // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    CLI::App app{"Non-Local Means denoising with nearest and statistical nearest neighbors"};
    app.name(args.empty() ? "snn_nlm" : fs::path(args[0]).filename().string());
    app.require_subcommand(1);

    DenoiseConfig dn;
    dn.threads = default_threads();
    auto *denoise = app.add_subcommand("denoise", "Denoise an image with NLM (NN when offset is 0, SNN otherwise)");
    denoise->add_option("--in", dn.input, "Noisy input image (PNG, PGM, PPM)")->required();
    denoise->add_option("--out", dn.output, "Output image")->required();
    denoise->add_option("--ref", dn.reference, "Clean reference; prints PSNR and SSIM");
    denoise->add_option("--sigma", dn.sigma, "Noise standard deviation, 0-255 scale")->capture_default_str();
    denoise->add_option("--filter-h", dn.h, "Filtering parameter, 0-255 scale (default 0.75 sigma)");
    denoise->add_option("--neighbors", dn.n_neighbors, "Neighbors per patch")->capture_default_str();
    denoise->add_option("--offset", dn.offset, "SNN offset o in [0, 1]")->capture_default_str();
    denoise->add_option("--patch", dn.patch_side, "Patch side (odd)")->capture_default_str();
    denoise->add_option("--search", dn.search_side, "Search window side (odd)")->capture_default_str();
    add_threads(denoise, dn.threads);

    AddNoiseConfig an;
    an.threads = default_threads();
    std::string an_domain = "white";
    std::string an_pattern = "rggb";
    auto *add_noise = app.add_subcommand("add-noise", "Add white or Bayer-domain (colored) Gaussian noise");
    add_noise->add_option("--in", an.input, "Clean input image")->required();
    add_noise->add_option("--out", an.output, "Noisy output image")->required();
    add_noise->add_option("--sigma", an.sigma, "Noise standard deviation, 0-255 scale")->capture_default_str();
    add_noise->add_option("--seed", an.seed, "RNG seed")->capture_default_str();
    add_noise->add_option("--domain", an_domain, "white | bayer")
        ->check(CLI::IsMember({"white", "bayer"}))
        ->capture_default_str();
    add_noise->add_option("--pattern", an_pattern, "CFA pattern: rggb | grbg | gbrg | bggr")
        ->check(CLI::IsMember({"rggb", "grbg", "gbrg", "bggr"}, CLI::ignore_case))
        ->capture_default_str();
    add_noise->add_flag("--clip-cfa", an.clip_cfa, "Clip the noisy CFA to [0, 1] before demosaicing");
    add_threads(add_noise, an.threads);

    ToyConfig ty;
    ty.threads = default_threads();
    std::string curve;
    auto *toy_cmd = app.add_subcommand("toy", "Bias/variance of the single-pixel NN and SNN estimators");
    toy_cmd->add_option("--mu", ty.scenario.mu, "Noise-free value")->capture_default_str();
    toy_cmd->add_option("--sigma", ty.scenario.sigma, "Noise standard deviation")->capture_default_str();
    toy_cmd->add_option("--total", ty.scenario.n_total, "Number of noisy samples N")->capture_default_str();
    toy_cmd->add_option("--neighbors", ty.scenario.n_neighbors, "Neighbors collected")->capture_default_str();
    toy_cmd->add_option("--offset", ty.scenario.offset, "SNN offset o")->capture_default_str();
    toy_cmd->add_option("--curve", curve, "Write E/Std curves as CSV to this file");
    toy_cmd->add_option("--curve-points", ty.curve_points, "Points on the curve")->capture_default_str();
    toy_cmd->add_option("--oracle", ty.oracle_trials, "Also run the Monte-Carlo oracle with this many trials");
    toy_cmd->add_option("--seed", ty.seed, "Oracle RNG seed")->capture_default_str();
    add_threads(toy_cmd, ty.threads);

    BenchConfig bc;
    bc.threads = default_threads();
    std::string bc_domain = "white";
    std::string bc_pattern = "rggb";
    std::string bc_out;
    auto *bench = app.add_subcommand("bench", "Sweep sigma, neighbor count and offset over a set of images");
    bench->add_option("--images", bc.images, "Image files or directories")->required();
    bench->add_option("--sigmas", bc.sigmas, "Noise levels, 0-255 scale")->delimiter(',')->capture_default_str();
    bench->add_option("--neighbors", bc.neighbors, "Neighbor counts")->delimiter(',')->capture_default_str();
    bench->add_option("--offsets", bc.offsets, "Offsets (0 = NN)")->delimiter(',')->capture_default_str();
    bench->add_option("--patch", bc.patch_side, "Patch side")->capture_default_str();
    bench->add_option("--search", bc.search_side, "Search window side")->capture_default_str();
    bench->add_option("--h-factor", bc.h_factor, "h as a multiple of sigma")->capture_default_str();
    bench->add_option("--domain", bc_domain, "white | bayer")
        ->check(CLI::IsMember({"white", "bayer"}))
        ->capture_default_str();
    bench->add_option("--pattern", bc_pattern, "CFA pattern")
        ->check(CLI::IsMember({"rggb", "grbg", "gbrg", "bggr"}, CLI::ignore_case))
        ->capture_default_str();
    bench->add_option("--seed", bc.seed, "Noise seed")->capture_default_str();
    bench->add_option("--out", bc_out, "CSV output file (default stdout)");
    add_threads(bench, bc.threads);

    std::vector<const char *> argv;
    argv.reserve(args.size());
    for (const auto &a : args)
        argv.push_back(a.c_str());
    try {
        app.parse(int(argv.size()), argv.data());
    } catch (const CLI::CallForHelp &e) {
        app.exit(e, out, err);
        return kOk;
    } catch (const CLI::CallForAllHelp &e) {
        app.exit(e, out, err);
        return kOk;
    } catch (const CLI::ParseError &e) {
        app.exit(e, out, err);
        return kUsageError;
    }

    try {
        if (*denoise)
            return cmd_denoise(dn, out, err);
        if (*add_noise) {
            an.domain = an_domain == "bayer" ? NoiseDomain::bayer_colored : NoiseDomain::rgb_white;
            an.pattern = parse_bayer_pattern(an_pattern);
            return cmd_add_noise(an, out, err);
        }
        if (*toy_cmd) {
            if (!curve.empty())
                ty.curve = curve;
            return cmd_toy(ty, out, err);
        }
        if (*bench) {
            bc.domain = bc_domain == "bayer" ? NoiseDomain::bayer_colored : NoiseDomain::rgb_white;
            bc.pattern = parse_bayer_pattern(bc_pattern);
            if (!bc_out.empty())
                bc.output = bc_out;
            return cmd_bench(bc, out, err);
        }
    } catch (const std::invalid_argument &e) {
        err << "error: " << e.what() << '\n';
        return kUsageError;
    } catch (const std::exception &e) {
        err << "internal error: " << e.what() << '\n';
        return kInternalError;
    }
    return kUsageError;
}

} // namespace snn::cli
