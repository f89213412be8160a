#include "bci/service.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "bci/error.hpp"
#include "bci/json_io.hpp"
#include "bci/version.hpp"

namespace bci {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class WsSession;

struct SessionInfo {
    std::string id;
    std::string kind;
    std::string status;  // running | complete | incomplete | failed
    std::string error;
    std::string path;
    json detail = json::object();
};

json metrics_json(const SessionMetrics& m) {
    json j = json::object();
    j["boxes_caught"] = m.boxes_caught ? json(*m.boxes_caught) : json();
    j["max_streak"] = m.max_streak ? json(*m.max_streak) : json();
    j["user_rating"] = m.user_rating ? json(*m.user_rating) : json();
    j["training_accuracy"] = m.training_accuracy ? json(*m.training_accuracy) : json();
    return j;
}

json record_json(const SessionRecord& r) {
    json keys = json::array();
    for (const auto& e : r.key_log.events()) {
        keys.push_back({{"t", e.t},
                        {"key", e.key == Key::Left ? "left" : "right"},
                        {"action", e.action == KeyAction::Down ? "down" : "up"}});
    }
    return {{"header", json::parse(header_to_json(r.header))},
            {"metrics", metrics_json(r.metrics)},
            {"frames", r.frames.size()},
            {"key_events", keys}};
}

}  // namespace

class Service::Impl : public std::enable_shared_from_this<Service::Impl> {
public:
    explicit Impl(ServiceConfig cfg) : cfg_(std::move(cfg)), acceptor_(ioc_) {}

    void start();
    void stop();
    void wait();
    std::uint16_t port() const { return port_; }

    void join(const std::shared_ptr<WsSession>& s);
    void leave(const std::shared_ptr<WsSession>& s);
    void broadcast(const json& msg);
    void on_message(const std::string& text, const std::shared_ptr<WsSession>& from);
    http::response<http::string_body> handle(const http::request<http::string_body>& req);

private:
    void accept();
    json start_session(const json& body);
    void run_session(std::string id, std::string kind, SessionPlan plan, ModelKind model_kind, SourceSpec source,
                     std::string model_path);
    std::string new_session_id();
    void scan_existing();

    ServiceConfig cfg_;
    net::io_context ioc_;
    tcp::acceptor acceptor_;
    std::thread io_thread_;
    std::uint16_t port_ = 0;

    std::mutex hub_mu_;
    std::set<std::shared_ptr<WsSession>> clients_;

    std::mutex reg_mu_;
    std::map<std::string, SessionInfo> registry_;
    std::optional<std::string> active_;
    std::shared_ptr<QueuedKeys> keys_;
    std::thread session_thread_;
    std::atomic<bool> stopping_{false};

    std::mutex rating_mu_;
    std::condition_variable rating_cv_;
    std::optional<int> rating_;
    bool rating_open_ = false;

    std::mutex stop_mu_;
    std::condition_variable stop_cv_;
    bool stopped_ = false;
};

namespace {

class WsSession : public std::enable_shared_from_this<WsSession> {
public:
    WsSession(tcp::socket socket, std::shared_ptr<Service::Impl> hub) : ws_(std::move(socket)), hub_(std::move(hub)) {}

    void run(http::request<http::string_body> req) {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
            if (ec) return;
            self->hub_->join(self);
            self->read();
        });
    }

    void send(std::shared_ptr<const std::string> msg) {
        net::post(ws_.get_executor(), [self = shared_from_this(), msg] {
            if (self->outq_.size() >= 4096) return;  // slow client: drop
            self->outq_.push_back(msg);
            if (self->outq_.size() == 1) self->write();
        });
    }

    void close() {
        net::post(ws_.get_executor(), [self = shared_from_this()] {
            beast::error_code ec;
            beast::get_lowest_layer(self->ws_).socket().close(ec);
        });
    }

private:
    void read() {
        ws_.async_read(buf_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->hub_->leave(self);
                return;
            }
            const auto text = beast::buffers_to_string(self->buf_.data());
            self->buf_.consume(self->buf_.size());
            self->hub_->on_message(text, self);
            self->read();
        });
    }

    void write() {
        ws_.text(true);
        ws_.async_write(net::buffer(*outq_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->hub_->leave(self);
                return;
            }
            self->outq_.pop_front();
            if (!self->outq_.empty()) self->write();
        });
    }

    websocket::stream<beast::tcp_stream> ws_;
    beast::flat_buffer buf_;
    std::deque<std::shared_ptr<const std::string>> outq_;
    std::shared_ptr<Service::Impl> hub_;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
public:
    HttpSession(tcp::socket socket, std::shared_ptr<Service::Impl> hub) : stream_(std::move(socket)), hub_(std::move(hub)) {}

    void run() {
        stream_.expires_after(std::chrono::seconds(30));
        http::async_read(stream_, buf_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return;
            if (websocket::is_upgrade(self->req_)) {
                if (self->req_.target() != "/ws") return;
                beast::get_lowest_layer(self->stream_).expires_never();
                std::make_shared<WsSession>(self->stream_.release_socket(), self->hub_)->run(std::move(self->req_));
                return;
            }
            auto res = std::make_shared<http::response<http::string_body>>(self->hub_->handle(self->req_));
            http::async_write(self->stream_, *res, [self, res](beast::error_code, std::size_t) {
                beast::error_code ec2;
                self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec2);
            });
        });
    }

private:
    beast::tcp_stream stream_;
    beast::flat_buffer buf_;
    http::request<http::string_body> req_;
    std::shared_ptr<Service::Impl> hub_;
};

http::response<http::string_body> reply(const http::request<http::string_body>& req, http::status status,
                                        const json& body) {
    http::response<http::string_body> res{status, req.version()};
    res.set(http::field::server, "bci-engine");
    res.set(http::field::content_type, "application/json");
    res.keep_alive(false);
    res.body() = body.dump();
    res.prepare_payload();
    return res;
}

}  // namespace

void Service::Impl::start() {
    fs::create_directories(cfg_.sessions_dir);
    scan_existing();
    const auto addr = net::ip::make_address(cfg_.address);
    tcp::endpoint ep(addr, cfg_.port);
    try {
        acceptor_.open(ep.protocol());
        acceptor_.set_option(net::socket_base::reuse_address(true));
        acceptor_.bind(ep);
        acceptor_.listen();
    } catch (const boost::system::system_error& e) {
        raise(ErrorKind::SourceUnavailable, "cannot listen on " + cfg_.address + ":" + std::to_string(cfg_.port) +
                                                ": " + e.what());
    }
    port_ = acceptor_.local_endpoint().port();
    accept();
    io_thread_ = std::thread([self = shared_from_this()] { self->ioc_.run(); });
}

void Service::Impl::accept() {
    acceptor_.async_accept(net::make_strand(ioc_), [self = shared_from_this()](beast::error_code ec, tcp::socket s) {
        if (ec) return;
        std::make_shared<HttpSession>(std::move(s), self)->run();
        self->accept();
    });
}

void Service::Impl::stop() {
    if (stopping_.exchange(true)) return;
    {
        std::lock_guard lock(rating_mu_);
        rating_open_ = false;
    }
    rating_cv_.notify_all();
    if (session_thread_.joinable()) session_thread_.join();
    net::post(ioc_, [self = shared_from_this()] {
        beast::error_code ec;
        self->acceptor_.close(ec);
        std::lock_guard lock(self->hub_mu_);
        for (const auto& c : self->clients_) c->close();
        self->clients_.clear();
    });
    // let the close handlers run, then stop the loop
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    ioc_.stop();
    if (io_thread_.joinable()) io_thread_.join();
    {
        std::lock_guard lock(stop_mu_);
        stopped_ = true;
    }
    stop_cv_.notify_all();
}

void Service::Impl::wait() {
    std::unique_lock lock(stop_mu_);
    stop_cv_.wait(lock, [&] { return stopped_; });
}

void Service::Impl::join(const std::shared_ptr<WsSession>& s) {
    std::lock_guard lock(hub_mu_);
    clients_.insert(s);
}

void Service::Impl::leave(const std::shared_ptr<WsSession>& s) {
    std::lock_guard lock(hub_mu_);
    clients_.erase(s);
}

void Service::Impl::broadcast(const json& msg) {
    auto text = std::make_shared<const std::string>(msg.dump());
    std::lock_guard lock(hub_mu_);
    for (const auto& c : clients_) c->send(text);
}

void Service::Impl::on_message(const std::string& text, const std::shared_ptr<WsSession>& from) {
    auto error = [&](const std::string& what) {
        from->send(std::make_shared<const std::string>(json{{"v", 1}, {"type", "error"}, {"message", what}}.dump()));
    };
    json msg;
    try {
        msg = json::parse(text);
    } catch (const json::exception&) {
        error("malformed JSON");
        return;
    }
    if (!msg.is_object() || msg.value("v", 0) != 1) {
        error("unsupported schema version");
        return;
    }
    const auto type = msg.value("type", "");
    if (type == "key") {
        const auto key = msg.value("key", "");
        const auto action = msg.value("action", "");
        if ((key != "left" && key != "right") || (action != "down" && action != "up")) {
            error("key message needs key left|right and action down|up");
            return;
        }
        std::shared_ptr<QueuedKeys> keys;
        {
            std::lock_guard lock(reg_mu_);
            keys = keys_;
        }
        if (!keys) {
            error("no active session");
            return;
        }
        // t_client is advisory only; the engine stamps the session time.
        keys->push(key == "left" ? Key::Left : Key::Right, action == "down" ? KeyAction::Down : KeyAction::Up);
    } else if (type == "rating") {
        const auto& v = msg["value"];
        if (!v.is_number_integer() || v.get<int>() < 1 || v.get<int>() > 5) {
            error("rating must be an integer 1-5");
            return;
        }
        {
            std::lock_guard lock(rating_mu_);
            if (!rating_open_ || rating_) {
                error("no rating requested");
                return;
            }
            rating_ = v.get<int>();
        }
        rating_cv_.notify_all();
    } else {
        error("unknown message type '" + type + "'");
    }
}

std::string Service::Impl::new_session_id() {
    for (int i = static_cast<int>(registry_.size()) + 1;; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "session-%04d", i);
        if (!registry_.count(buf) && !fs::exists(fs::path(cfg_.sessions_dir) / (std::string(buf) + ".bcis"))) {
            return buf;
        }
    }
}

void Service::Impl::scan_existing() {
    for (const auto& entry : fs::directory_iterator(cfg_.sessions_dir)) {
        if (entry.path().extension() != ".bcis") continue;
        try {
            const auto rec = load_session(entry.path().string());
            SessionInfo info;
            info.id = rec.header.session_id;
            info.kind = rec.header.phase;
            info.status = "complete";
            info.path = entry.path().string();
            info.detail = record_json(rec);
            registry_[info.id] = std::move(info);
        } catch (const Error&) {
            // unreadable files are not listed
        }
    }
}

json Service::Impl::start_session(const json& body) {
    SessionPlan plan = cfg_.plan;
    std::string kind = "training";
    if (body.contains("plan")) {
        const auto& p = body["plan"];
        kind = p.value("kind", kind);
        plan.training_s = p.value("training_s", plan.training_s);
        plan.demo_s = p.value("demo_s", plan.demo_s);
        plan.record_s = p.value("record_s", plan.record_s);
        plan.control_s = p.value("control_s", plan.control_s);
    }
    if (kind != "training" && kind != "demo" && kind != "validation") {
        raise(ErrorKind::InvalidArgument, "plan.kind must be training, demo or validation");
    }
    plan.validate();
    const auto model_kind = parse_model_kind(body.value("model_kind", "knn"));
    SourceSpec source = cfg_.source;
    if (body.contains("source")) {
        const auto synth = source.synth;
        source = SourceSpec::parse(body["source"].get<std::string>());
        source.synth = synth;
    }
    const std::string model_path = body.value("model", cfg_.model_path);
    if ((kind == "demo" || (kind == "validation" && model_kind == ModelKind::Cnn)) && model_path.empty()) {
        raise(ErrorKind::InvalidArgument, kind + " needs a model file");
    }

    std::lock_guard lock(reg_mu_);
    if (active_) return {{"error", "session " + *active_ + " is already running"}, {"conflict", true}};
    if (session_thread_.joinable()) session_thread_.join();
    const auto id = new_session_id();
    SessionInfo info;
    info.id = id;
    info.kind = kind;
    info.status = "running";
    registry_[id] = info;
    active_ = id;
    keys_ = std::make_shared<QueuedKeys>();
    {
        std::lock_guard rl(rating_mu_);
        rating_.reset();
        rating_open_ = false;
    }
    session_thread_ = std::thread(&Impl::run_session, this, id, kind, plan, model_kind, source, model_path);
    return {{"session_id", id}, {"kind", kind}};
}

void Service::Impl::run_session(std::string id, std::string kind, SessionPlan plan, ModelKind model_kind,
                                SourceSpec source, std::string model_path) {
    SessionObservers obs;
    obs.on_phase = [this](Phase p, double d) {
        broadcast({{"v", 1}, {"type", "phase"}, {"name", to_string(p)}, {"duration_s", d}});
    };
    obs.on_tick = [this](Phase p, double remaining, const GameState& g) {
        broadcast({{"v", 1},
                   {"type", "state"},
                   {"t", g.t},
                   {"bar_x", g.bar_x},
                   {"box", {g.box_x, g.box_y}},
                   {"score", g.score},
                   {"streak", g.streak},
                   {"phase", to_string(p)},
                   {"remaining_s", remaining}});
    };
    obs.on_quality = [this](const std::vector<bool>& railed) {
        broadcast({{"v", 1}, {"type", "quality"}, {"railed", railed}});
    };

    std::shared_ptr<QueuedKeys> keys;
    {
        std::lock_guard lock(reg_mu_);
        keys = keys_;
    }
    SessionInfo info;
    info.id = id;
    info.kind = kind;
    try {
        auto factory = make_source_factory(source, cfg_.engine.sampling);
        const auto path = (fs::path(cfg_.sessions_dir) / (id + ".bcis")).string();
        if (kind == "training") {
            auto rec = run_training_session(cfg_.engine, factory, *keys, plan, id, obs);
            rec.header.source = source.describe();
            save_session(rec, path);
            info.status = "complete";
            info.path = path;
            info.detail = record_json(rec);
        } else if (kind == "demo") {
            const auto model = load_model(model_path);
            const auto res = run_demo(model, cfg_.engine, factory, *keys, plan, obs);
            info.status = "complete";
            info.detail = {{"metrics", {{"boxes_caught", res.boxes_caught}, {"max_streak", res.max_streak}}},
                           {"agreement", res.agreement}};
        } else {
            std::optional<Classifier> pretrained;
            if (!model_path.empty() && model_kind == ModelKind::Cnn) pretrained = load_model(model_path);
            ValidationOptions opts;
            opts.kind = model_kind;
            opts.pretrained = pretrained ? &*pretrained : nullptr;
            opts.rating = [this]() -> std::optional<int> {
                std::unique_lock lock(rating_mu_);
                rating_open_ = true;
                lock.unlock();
                broadcast({{"v", 1}, {"type", "phase"}, {"name", "rating"}, {"duration_s", cfg_.rating_timeout_s}});
                lock.lock();
                rating_cv_.wait_for(lock, std::chrono::duration<double>(cfg_.rating_timeout_s),
                                    [&] { return rating_.has_value() || stopping_.load(); });
                rating_open_ = false;
                return rating_;
            };
            auto res = run_validation(opts, cfg_.engine, factory, *keys, plan, id, obs);
            res.record.header.source = source.describe();
            save_session(res.record, path);
            info.status = res.row.complete ? "complete" : "incomplete";
            if (!res.row.complete) info.error = std::string(to_string(ErrorKind::RatingMissing));
            info.path = path;
            info.detail = record_json(res.record);
            info.detail["agreement"] = res.row.agreement;
        }
    } catch (const std::exception& e) {
        info.status = "failed";
        info.error = e.what();
    }
    {
        std::lock_guard lock(reg_mu_);
        registry_[id] = std::move(info);
        keys_.reset();
        active_.reset();
    }
    broadcast({{"v", 1}, {"type", "phase"}, {"name", "done"}, {"duration_s", 0}});
}

http::response<http::string_body> Service::Impl::handle(const http::request<http::string_body>& req) {
    const std::string target(req.target());
    try {
        if (req.method() == http::verb::get && target == "/health") {
            std::lock_guard lock(reg_mu_);
            return reply(req, http::status::ok,
                         {{"status", "ok"},
                          {"version", kSoftwareVersion},
                          {"active_session", active_ ? json(*active_) : json()}});
        }
        if (req.method() == http::verb::get && target == "/sessions") {
            json list = json::array();
            std::lock_guard lock(reg_mu_);
            for (const auto& [id, info] : registry_) {
                list.push_back({{"id", id}, {"kind", info.kind}, {"status", info.status}});
            }
            return reply(req, http::status::ok, {{"sessions", list}});
        }
        if (req.method() == http::verb::get && target.rfind("/sessions/", 0) == 0) {
            const auto id = target.substr(10);
            std::lock_guard lock(reg_mu_);
            const auto it = registry_.find(id);
            if (it == registry_.end()) return reply(req, http::status::not_found, {{"error", "no session " + id}});
            json j = it->second.detail;
            j["id"] = id;
            j["kind"] = it->second.kind;
            j["status"] = it->second.status;
            if (!it->second.error.empty()) j["error"] = it->second.error;
            return reply(req, http::status::ok, j);
        }
        if (req.method() == http::verb::post && target == "/session/start") {
            const json body = req.body().empty() ? json::object() : json::parse(req.body());
            auto res = start_session(body);
            if (res.contains("conflict")) {
                res.erase("conflict");
                return reply(req, http::status::conflict, res);
            }
            return reply(req, http::status::ok, res);
        }
        return reply(req, http::status::not_found, {{"error", "no route " + target}});
    } catch (const Error& e) {
        return reply(req, http::status::bad_request, {{"error", e.what()}, {"kind", to_string(e.kind())}});
    } catch (const json::exception& e) {
        return reply(req, http::status::bad_request, {{"error", e.what()}});
    }
}

Service::Service(ServiceConfig cfg) : impl_(std::make_shared<Impl>(std::move(cfg))) {}
Service::~Service() { impl_->stop(); }
void Service::start() { impl_->start(); }
std::uint16_t Service::port() const { return impl_->port(); }
void Service::stop() { impl_->stop(); }
void Service::wait() { impl_->wait(); }

}  // namespace bci
