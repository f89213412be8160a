#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>

#include <chrono>
#include <condition_variable>
#include <mutex>
#include <thread>

#include "bci/service.hpp"
#include "test_util.hpp"

using namespace bci;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

namespace {

struct Reply {
    int status = 0;
    json body;
};

Reply request(std::uint16_t port, http::verb verb, const std::string& target, const std::string& body = "") {
    net::io_context ioc;
    tcp::resolver resolver(ioc);
    beast::tcp_stream stream(ioc);
    stream.connect(resolver.resolve("127.0.0.1", std::to_string(port)));
    http::request<http::string_body> req{verb, target, 11};
    req.set(http::field::host, "127.0.0.1");
    req.set(http::field::content_type, "application/json");
    req.body() = body;
    req.prepare_payload();
    http::write(stream, req);
    beast::flat_buffer buf;
    http::response<http::string_body> res;
    http::read(stream, buf, res);
    beast::error_code ec;
    stream.socket().shutdown(tcp::socket::shutdown_both, ec);
    return {static_cast<int>(res.result_int()), json::parse(res.body())};
}

// Headless UI: collects every server message on a reader thread.
class WsClient {
public:
    explicit WsClient(std::uint16_t port) : ws_(ioc_) {
        tcp::resolver resolver(ioc_);
        net::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
        ws_.handshake("127.0.0.1", "/ws");
        reader_ = std::thread([this] {
            for (;;) {
                beast::flat_buffer buf;
                beast::error_code ec;
                ws_.read(buf, ec);
                if (ec) break;
                auto msg = json::parse(beast::buffers_to_string(buf.data()));
                std::lock_guard lock(mu_);
                msgs_.push_back(std::move(msg));
                cv_.notify_all();
            }
        });
    }
    ~WsClient() {
        beast::error_code ec;
        ws_.next_layer().shutdown(tcp::socket::shutdown_both, ec);
        ws_.next_layer().close(ec);
        if (reader_.joinable()) reader_.join();
    }

    void send(const json& j) {
        std::lock_guard lock(write_mu_);
        ws_.write(net::buffer(j.dump()));
    }

    // Waits for a phase message with this name.
    bool wait_phase(const std::string& name, double timeout_s) {
        std::unique_lock lock(mu_);
        return cv_.wait_for(lock, std::chrono::duration<double>(timeout_s), [&] {
            for (const auto& m : msgs_) {
                if (m.value("type", "") == "phase" && m.value("name", "") == name) return true;
            }
            return false;
        });
    }

    std::vector<json> messages() {
        std::lock_guard lock(mu_);
        return msgs_;
    }

private:
    net::io_context ioc_;
    websocket::stream<tcp::socket> ws_;
    std::thread reader_;
    std::mutex mu_, write_mu_;
    std::condition_variable cv_;
    std::vector<json> msgs_;
};

ServiceConfig test_config(const TempDir& dir) {
    ServiceConfig c;
    c.port = 0;
    c.sessions_dir = dir.path().string();
    c.rating_timeout_s = 10.0;
    return c;
}

}  // namespace

TEST(Service, HttpRoutes) {
    TempDir dir("svc_http");
    Service svc(test_config(dir));
    svc.start();
    const auto h = request(svc.port(), http::verb::get, "/health");
    EXPECT_EQ(h.status, 200);
    EXPECT_EQ(h.body["status"], "ok");
    EXPECT_EQ(request(svc.port(), http::verb::get, "/sessions").body["sessions"].size(), 0u);
    EXPECT_EQ(request(svc.port(), http::verb::get, "/sessions/nope").status, 404);
    EXPECT_EQ(request(svc.port(), http::verb::get, "/elsewhere").status, 404);
    EXPECT_EQ(request(svc.port(), http::verb::post, "/session/start", "{not json").status, 400);
    EXPECT_EQ(request(svc.port(), http::verb::post, "/session/start", R"({"plan":{"kind":"party"}})").status, 400);
    EXPECT_EQ(request(svc.port(), http::verb::post, "/session/start", R"({"model_kind":"svm"})").status, 400);
    svc.stop();
}

TEST(Service, HundredKeysLandOnceWithServerTimes) {
    TempDir dir("svc_keys");
    auto cfg = test_config(dir);
    cfg.engine.realtime_factor = 2.0;
    Service svc(cfg);
    svc.start();
    WsClient ui(svc.port());
    const auto start = request(svc.port(), http::verb::post, "/session/start",
                               R"({"plan":{"kind":"training","training_s":8},"model_kind":"knn"})");
    ASSERT_EQ(start.status, 200);
    const std::string id = start.body["session_id"];
    EXPECT_EQ(request(svc.port(), http::verb::post, "/session/start", "{}").status, 409);
    ASSERT_TRUE(ui.wait_phase("training", 5.0));

    for (int i = 0; i < 50; ++i) {
        const std::string key = i % 2 ? "right" : "left";
        ui.send({{"v", 1}, {"type", "key"}, {"key", key}, {"action", "down"}, {"t_client", 1e9}});
        std::this_thread::sleep_for(std::chrono::milliseconds(15));
        ui.send({{"v", 1}, {"type", "key"}, {"key", key}, {"action", "up"}, {"t_client", -1}});
        std::this_thread::sleep_for(std::chrono::milliseconds(15));
    }
    ASSERT_TRUE(ui.wait_phase("done", 15.0));
    const auto s = request(svc.port(), http::verb::get, "/sessions/" + id);
    ASSERT_EQ(s.status, 200);
    EXPECT_EQ(s.body["status"], "complete");
    const auto& keys = s.body["key_events"];
    ASSERT_EQ(keys.size(), 100u);
    double prev = -1.0;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        const double t = keys[i]["t"];
        EXPECT_GE(t, prev);
        EXPECT_LT(t, 8.0);  // server clock, not the client's advisory value
        prev = t;
        EXPECT_EQ(keys[i]["key"], (i / 2) % 2 ? "right" : "left");
        EXPECT_EQ(keys[i]["action"], i % 2 ? "up" : "down");
    }

    // state stream at the tick rate: 60 Hz over 8 s
    std::size_t states = 0;
    for (const auto& m : ui.messages()) {
        if (m["type"] == "state") {
            ++states;
            EXPECT_EQ(m["v"], 1);
            EXPECT_EQ(m["box"].size(), 2u);
            EXPECT_EQ(m["phase"], "training");
        }
    }
    EXPECT_NEAR(static_cast<double>(states), 480.0, 2.0);
    svc.stop();

    // the saved session is picked up by a new service instance
    Service again(test_config(dir));
    again.start();
    const auto listed = request(again.port(), http::verb::get, "/sessions");
    ASSERT_EQ(listed.body["sessions"].size(), 1u);
    EXPECT_EQ(listed.body["sessions"][0]["id"], id);
    again.stop();
}

TEST(Service, RatingFlow) {
    TempDir dir("svc_rating");
    auto cfg = test_config(dir);
    cfg.engine.realtime_factor = 10.0;
    Service svc(cfg);
    svc.start();
    WsClient ui(svc.port());
    const auto start = request(svc.port(), http::verb::post, "/session/start",
                               R"({"plan":{"kind":"validation","record_s":10,"control_s":5},"model_kind":"knn"})");
    ASSERT_EQ(start.status, 200);
    const std::string id = start.body["session_id"];
    ASSERT_TRUE(ui.wait_phase("record", 5.0));
    // unsolicited rating is refused
    ui.send({{"v", 1}, {"type", "rating"}, {"value", 5}});
    ui.send({{"v", 1}, {"type", "key"}, {"key", "left"}, {"action", "down"}});
    ASSERT_TRUE(ui.wait_phase("control", 10.0));
    ASSERT_TRUE(ui.wait_phase("rating", 10.0));
    ui.send({{"v", 1}, {"type", "rating"}, {"value", 9}});  // out of range
    ui.send({{"v", 1}, {"type", "rating"}, {"value", 4}});
    ASSERT_TRUE(ui.wait_phase("done", 10.0));
    const auto s = request(svc.port(), http::verb::get, "/sessions/" + id);
    EXPECT_EQ(s.body["status"], "complete");
    EXPECT_EQ(s.body["metrics"]["user_rating"], 4);
    std::size_t errors = 0;
    for (const auto& m : ui.messages()) errors += m["type"] == "error";
    EXPECT_EQ(errors, 2u);
    const auto rec = load_session(dir.file(id + ".bcis"));
    EXPECT_EQ(rec.metrics.user_rating, std::optional<std::uint8_t>(4));
    svc.stop();
}

TEST(Service, MissingRatingMarksIncomplete) {
    TempDir dir("svc_norating");
    auto cfg = test_config(dir);
    cfg.engine.realtime_factor = 20.0;
    cfg.rating_timeout_s = 0.3;
    Service svc(cfg);
    svc.start();
    WsClient ui(svc.port());
    const auto start = request(svc.port(), http::verb::post, "/session/start",
                               R"({"plan":{"kind":"validation","record_s":6,"control_s":3}})");
    ASSERT_EQ(start.status, 200);
    ASSERT_TRUE(ui.wait_phase("done", 10.0));
    const auto s = request(svc.port(), http::verb::get, "/sessions/" + start.body["session_id"].get<std::string>());
    EXPECT_EQ(s.body["status"], "incomplete");
    EXPECT_EQ(s.body["error"], "RatingMissing");
    EXPECT_TRUE(s.body["metrics"]["user_rating"].is_null());
    svc.stop();
}
