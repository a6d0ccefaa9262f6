#include "plcql/checkpoint.hpp"

#include "plcql/errors.hpp"

namespace plcql {

void write_net(TextDoc& doc, const std::string& prefix, const Mlp& net) {
    doc.set_ints(prefix + ".layer_sizes", net.layer_sizes);
    doc.set(prefix + ".activation", "tanh");
    const auto flat = net.flatten();
    doc.set_doubles(prefix + ".params", flat);
}

Mlp read_net(const TextDoc& doc, const std::string& prefix) {
    Mlp net = Mlp::zeros(doc.get_ints(prefix + ".layer_sizes"));
    const auto flat = doc.get_doubles(prefix + ".params");
    net.unflatten(flat);
    return net;
}

void write_optimizer(TextDoc& doc, const std::string& prefix, const Optimizer& opt, const Mlp& owner) {
    doc.set(prefix + ".mode", opt.mode == Optimizer::Mode::Sgd ? "sgd" : "adam");
    doc.set_double(prefix + ".lr", opt.lr);
    doc.set_double(prefix + ".beta1", opt.beta1);
    doc.set_double(prefix + ".beta2", opt.beta2);
    doc.set_double(prefix + ".eps", opt.eps);
    doc.set_int(prefix + ".step", opt.step);
    const bool has_state = !opt.m.weights.empty();
    doc.set_int(prefix + ".has_moments", has_state ? 1 : 0);
    if (has_state) {
        if (!opt.m.shape_matches(owner)) throw IoError("write_optimizer: moment shapes do not match owner");
        doc.set_doubles(prefix + ".m", opt.m.flatten());
        doc.set_doubles(prefix + ".v", opt.v.flatten());
    }
}

Optimizer read_optimizer(const TextDoc& doc, const std::string& prefix, const Mlp& owner) {
    Optimizer opt;
    const std::string mode = doc.get(prefix + ".mode");
    if (mode == "sgd")
        opt.mode = Optimizer::Mode::Sgd;
    else if (mode == "adam")
        opt.mode = Optimizer::Mode::Adam;
    else
        throw IoError("read_optimizer: unknown mode '" + mode + "'");
    opt.lr = doc.get_double(prefix + ".lr");
    opt.beta1 = doc.get_double(prefix + ".beta1");
    opt.beta2 = doc.get_double(prefix + ".beta2");
    opt.eps = doc.get_double(prefix + ".eps");
    opt.step = doc.get_int(prefix + ".step");
    if (doc.get_int(prefix + ".has_moments") != 0) {
        opt.m = GradientBundle::zeros_like(owner);
        opt.v = GradientBundle::zeros_like(owner);
        opt.m.unflatten(doc.get_doubles(prefix + ".m"));
        opt.v.unflatten(doc.get_doubles(prefix + ".v"));
    }
    return opt;
}

TextDoc make_checkpoint(const std::string& module_tag, std::uint64_t rng_seed, long long step) {
    TextDoc doc;
    doc.set_int("format_version", kCheckpointFormatVersion);
    doc.set("module", module_tag);
    doc.set_int("rng_seed", static_cast<long long>(rng_seed));
    doc.set_int("step", step);
    return doc;
}

TextDoc open_checkpoint(const std::string& path, const std::string& expected_module) {
    TextDoc doc = TextDoc::load(path);
    const long long version = doc.get_int("format_version");
    if (version != kCheckpointFormatVersion)
        throw IoError("checkpoint '" + path + "': format_version " + std::to_string(version) +
                      " not supported (expected " + std::to_string(kCheckpointFormatVersion) + ")");
    const std::string module = doc.get("module");
    if (module != expected_module)
        throw IoError("checkpoint '" + path + "': module tag '" + module + "' (expected '" + expected_module + "')");
    return doc;
}

} // namespace plcql
