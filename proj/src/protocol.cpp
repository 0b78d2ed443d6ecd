#include "sden/protocol.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

#include "json.hpp"
#include "sden/resources.hpp"

namespace sden {

using nlohmann::json;

std::string_view to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::Request: return "Request";
    case MessageKind::Accept: return "Accept";
    case MessageKind::Reject: return "Reject";
    case MessageKind::DeliveryNotice: return "DeliveryNotice";
    case MessageKind::StorageNotice: return "StorageNotice";
    case MessageKind::Ack: return "Ack";
    case MessageKind::Emergency: return "Emergency";
  }
  return "?";
}

std::optional<MessageKind> parse_message_kind(std::string_view text) {
  for (auto k : {MessageKind::Request, MessageKind::Accept, MessageKind::Reject, MessageKind::DeliveryNotice,
                 MessageKind::StorageNotice, MessageKind::Ack, MessageKind::Emergency}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

std::string_view to_string(ClientRequestState state) {
  switch (state) {
    case ClientRequestState::Idle: return "Idle";
    case ClientRequestState::Requested: return "Requested";
    case ClientRequestState::Accepted: return "Accepted";
    case ClientRequestState::PartiallyDelivered: return "PartiallyDelivered";
    case ClientRequestState::Completed: return "Completed";
    case ClientRequestState::Rejected: return "Rejected";
    case ClientRequestState::EmergencyPending: return "EmergencyPending";
  }
  return "?";
}

std::optional<RetryPolicy> parse_retry_policy(std::string_view text) {
  if (text == "shift") return RetryPolicy::ShiftWindow;
  if (text == "reduce") return RetryPolicy::ReducePackets;
  if (text == "retry") return RetryPolicy::RetrySame;
  if (text == "give_up") return RetryPolicy::GiveUp;
  return std::nullopt;
}

Message make_request_message(const ServiceRequest& req, const AgentId& receiver, SlotIndex now) {
  Message m;
  m.kind = req.is_emergency ? MessageKind::Emergency : MessageKind::Request;
  m.correlation_id = req.request_id;
  m.sender = req.client_id;
  m.receiver = receiver;
  m.payload = RequestBody{req};
  m.sent_slot = now;
  return m;
}

bool should_escalate(int rejection_count, int threshold) {
  if (threshold < 1) throw std::invalid_argument("escalation threshold must be >= 1");
  return rejection_count >= threshold;
}

Message ClientProtocolState::issue(ServiceRequest req, const std::string& need, RetryPolicy policy,
                                   SlotIndex now) {
  auto& n = needs[need];
  n.policy = policy;
  ++n.attempts;
  req.request_id = client_id + "/" + std::to_string(next_seq++);
  req.client_id = client_id;
  req.submission_slot = now;
  req.is_emergency = should_escalate(n.rejections, escalation_threshold);
  TrackedRequest tracked;
  tracked.request = req;
  tracked.need = need;
  tracked.state = req.is_emergency ? ClientRequestState::EmergencyPending : ClientRequestState::Requested;
  requests.emplace(req.request_id, tracked);
  return make_request_message(req, upstream_id, now);
}

const TrackedRequest& ClientProtocolState::at(const RequestId& id) const {
  auto it = requests.find(id);
  if (it == requests.end()) throw std::out_of_range("unknown request " + id);
  return it->second;
}

namespace {

[[noreturn]] void violation(const TrackedRequest& t, const Message& msg) {
  throw ProtocolViolation("illegal " + std::string(to_string(msg.kind)) + " for " + t.request.request_id +
                          " in state " + std::string(to_string(t.state)));
}

/// Builds the follow-up request for a rejected one, or nullopt if the client gives up.
std::optional<ServiceRequest> follow_up(const ServiceRequest& old, const RejectHint& hint, RetryPolicy policy,
                                        SlotIndex earliest_allowed) {
  ServiceRequest next = old;
  switch (policy) {
    case RetryPolicy::GiveUp: return std::nullopt;
    case RetryPolicy::ShiftWindow: {
      const SlotIndex start = std::max(hint.earliest_feasible_slot, earliest_allowed);
      next.deadline_slot += start - old.earliest_slot;
      next.earliest_slot = start;
      break;
    }
    case RetryPolicy::ReducePackets:
      if (hint.max_packets_feasible_now > 0 && hint.max_packets_feasible_now < old.packets) {
        next.packets = hint.max_packets_feasible_now;
      }
      next.earliest_slot = std::max(old.earliest_slot, earliest_allowed);
      break;
    case RetryPolicy::RetrySame:
      next.earliest_slot = std::max(old.earliest_slot, earliest_allowed);
      break;
  }
  if (validate_request(next, earliest_allowed)) return std::nullopt;
  return next;
}

}  // namespace

std::optional<Message> ClientProtocolState::on_message(const Message& msg, SlotIndex now) {
  auto it = requests.find(msg.correlation_id);
  if (it == requests.end()) throw ProtocolViolation("unknown correlation id " + msg.correlation_id);
  TrackedRequest& t = it->second;
  const bool awaiting = t.state == ClientRequestState::Requested || t.state == ClientRequestState::EmergencyPending;

  switch (msg.kind) {
    case MessageKind::Accept:
      if (!awaiting) violation(t, msg);
      t.state = ClientRequestState::Accepted;
      return std::nullopt;

    case MessageKind::Reject: {
      if (!awaiting) violation(t, msg);
      t.state = ClientRequestState::Rejected;
      auto& need = needs[t.need];
      ++need.rejections;
      if (need.abandoned || need.attempts >= max_attempts) {
        need.abandoned = true;
        return std::nullopt;
      }
      const auto* body = std::get_if<RejectBody>(&msg.payload);
      const RejectHint hint = body ? body->hint : RejectHint{t.request.earliest_slot, 0};
      // The follow-up goes out next slot.
      auto next = follow_up(t.request, hint, need.policy, now + 1 + lead_slots);
      if (!next) {
        need.abandoned = true;
        return std::nullopt;
      }
      next->priority_hint = t.request.priority_hint;
      return issue(*next, t.need, need.policy, now + 1);
    }

    case MessageKind::DeliveryNotice: {
      if (t.state != ClientRequestState::Accepted && t.state != ClientRequestState::PartiallyDelivered) {
        violation(t, msg);
      }
      const auto* body = std::get_if<DeliveryBody>(&msg.payload);
      const Packets n = body ? body->packets : 0;
      if (n <= 0 || t.delivered + n > t.request.packets) {
        throw ProtocolViolation("delivery overflows request " + t.request.request_id);
      }
      t.delivered += n;
      if (t.delivered == t.request.packets) {
        t.state = ClientRequestState::Completed;
        t.completed_slot = body->slot;
      } else {
        t.state = ClientRequestState::PartiallyDelivered;
      }
      if (!acks_enabled) return std::nullopt;
      Message ack;
      ack.kind = MessageKind::Ack;
      ack.correlation_id = t.request.request_id;
      ack.sender = client_id;
      ack.receiver = msg.sender;
      ack.payload = AckBody{n};
      ack.sent_slot = now;
      return ack;
    }

    case MessageKind::Request:
    case MessageKind::Emergency:
    case MessageKind::StorageNotice:
    case MessageKind::Ack:
      violation(t, msg);
  }
  return std::nullopt;
}

ClientStep client_on_message(ClientProtocolState state, const Message& msg, SlotIndex now) {
  auto out = state.on_message(msg, now);
  return {std::move(state), std::move(out)};
}

void RouterPolicy::validate() const {
  if (mode == RouterMode::LocalFirst && local_resources.empty()) {
    throw std::invalid_argument("LocalFirst router needs at least one local resource");
  }
}

RouterOutput router_process(const RouterPolicy& policy, std::span<const ServiceRequest> batch,
                            const LocalView& local) {
  RouterOutput out;
  if (policy.mode == RouterMode::ForwardOnly || local.surplus_packets <= 0) {
    out.forwarded.assign(batch.begin(), batch.end());
    return out;
  }
  std::vector<std::size_t> order(batch.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = batch[a];
    const auto& y = batch[b];
    return std::tie(x.deadline_slot, x.submission_slot, x.request_id) <
           std::tie(y.deadline_slot, y.submission_slot, y.request_id);
  });
  std::vector<bool> served(batch.size(), false);
  Packets surplus = local.surplus_packets;
  for (std::size_t i : order) {
    const auto& r = batch[i];
    const bool in_window = r.earliest_slot <= local.slot && local.slot <= r.deadline_slot;
    const bool one_slot = r.shape.slot_limit(r.packets) >= r.packets;
    if (in_window && one_slot && !r.is_emergency && r.packets <= surplus) {
      surplus -= r.packets;
      served[i] = true;
      out.local.push_back({r.request_id, r.packets});
    }
  }
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!served[i]) out.forwarded.push_back(batch[i]);
  }
  return out;
}

void ChannelConfig::validate() const {
  if (delay_slots < 0) throw std::invalid_argument("channel delay must be >= 0");
  if (!(loss >= 0.0 && loss < 1.0)) throw std::invalid_argument("channel loss must lie in [0, 1)");
}

Channel::Channel(ChannelConfig config) : config_(config) { config_.validate(); }

std::optional<SlotIndex> Channel::send(const Message& msg, SlotIndex now) {
  const std::uint64_t seq = seq_++;
  if (config_.loss > 0.0 && seeded_uniform(config_.seed, seq) < config_.loss) return std::nullopt;
  const SlotIndex arrival = now + config_.delay_slots;
  queue_.push_back({arrival, seq, msg});
  return arrival;
}

std::vector<Message> Channel::deliver_due(SlotIndex now) {
  std::vector<InFlight> due;
  std::vector<InFlight> keep;
  for (auto& f : queue_) (f.arrival <= now ? due : keep).push_back(std::move(f));
  queue_ = std::move(keep);
  std::sort(due.begin(), due.end(), [](const InFlight& a, const InFlight& b) {
    return std::tie(a.arrival, a.msg.sender, a.seq) < std::tie(b.arrival, b.msg.sender, b.seq);
  });
  std::vector<Message> out;
  out.reserve(due.size());
  for (auto& f : due) out.push_back(std::move(f.msg));
  return out;
}

std::optional<SlotIndex> transport_deliver(Channel& channel, const Message& msg, SlotIndex now) {
  return channel.send(msg, now);
}

namespace {

json request_to_json(const ServiceRequest& r) {
  json j{{"request_id", r.request_id},
         {"client_id", r.client_id},
         {"packets", r.packets},
         {"earliest_slot", r.earliest_slot},
         {"deadline_slot", r.deadline_slot},
         {"shape", to_string(r.shape.kind)},
         {"is_emergency", r.is_emergency},
         {"submission_slot", r.submission_slot}};
  if (r.shape.kind == ShapeKind::PerSlotCap) j["per_slot_cap"] = r.shape.per_slot_cap;
  if (r.priority_hint) j["priority_hint"] = *r.priority_hint;
  return j;
}

ServiceRequest request_from_json(const json& j) {
  ServiceRequest r;
  r.request_id = j.at("request_id").get<std::string>();
  r.client_id = j.at("client_id").get<std::string>();
  r.packets = j.at("packets").get<Packets>();
  r.earliest_slot = j.at("earliest_slot").get<SlotIndex>();
  r.deadline_slot = j.at("deadline_slot").get<SlotIndex>();
  r.shape.kind = parse_shape_kind(j.at("shape").get<std::string>()).value();
  r.shape.per_slot_cap = j.value("per_slot_cap", Packets{0});
  if (r.shape.kind == ShapeKind::Contiguous) r.shape.per_slot_cap = 1;
  r.is_emergency = j.at("is_emergency").get<bool>();
  r.submission_slot = j.at("submission_slot").get<SlotIndex>();
  if (j.contains("priority_hint")) r.priority_hint = j.at("priority_hint").get<int>();
  return r;
}

}  // namespace

std::string to_json_line(const TraceRecord& record) {
  const Message& m = record.msg;
  json payload = std::visit(
      [](const auto& body) -> json {
        using T = std::decay_t<decltype(body)>;
        if constexpr (std::is_same_v<T, RequestBody>) return request_to_json(body.request);
        if constexpr (std::is_same_v<T, AcceptBody>) return {{"class", body.assigned_class}};
        if constexpr (std::is_same_v<T, RejectBody>)
          return {{"earliest_feasible_slot", body.hint.earliest_feasible_slot},
                  {"max_packets_feasible_now", body.hint.max_packets_feasible_now},
                  {"reason", body.reason}};
        if constexpr (std::is_same_v<T, DeliveryBody>) return {{"slot", body.slot}, {"packets", body.packets}};
        if constexpr (std::is_same_v<T, StorageBody>) return {{"slot", body.slot}, {"flow", body.flow}};
        if constexpr (std::is_same_v<T, AckBody>) return {{"packets", body.packets}};
      },
      m.payload);
  // ordered_json keeps the documented field order stable in the output.
  nlohmann::ordered_json j;
  j["slot"] = m.sent_slot;
  j["kind"] = to_string(m.kind);
  j["sender"] = m.sender;
  j["receiver"] = m.receiver;
  j["correlation_id"] = m.correlation_id;
  j["payload"] = payload;
  if (record.arrival) j["arrival"] = *record.arrival; else j["arrival"] = nullptr;
  return j.dump();
}

TraceRecord trace_record_from_json_line(const std::string& line) {
  const json j = json::parse(line);
  TraceRecord r;
  Message& m = r.msg;
  m.sent_slot = j.at("slot").get<SlotIndex>();
  m.kind = parse_message_kind(j.at("kind").get<std::string>()).value();
  m.sender = j.at("sender").get<std::string>();
  m.receiver = j.at("receiver").get<std::string>();
  m.correlation_id = j.at("correlation_id").get<std::string>();
  const json& p = j.at("payload");
  switch (m.kind) {
    case MessageKind::Request:
    case MessageKind::Emergency: m.payload = RequestBody{request_from_json(p)}; break;
    case MessageKind::Accept: m.payload = AcceptBody{p.at("class").get<int>()}; break;
    case MessageKind::Reject:
      m.payload = RejectBody{{p.at("earliest_feasible_slot").get<SlotIndex>(),
                              p.at("max_packets_feasible_now").get<Packets>()},
                             p.value("reason", std::string{})};
      break;
    case MessageKind::DeliveryNotice:
      m.payload = DeliveryBody{p.at("slot").get<SlotIndex>(), p.at("packets").get<Packets>()};
      break;
    case MessageKind::StorageNotice:
      m.payload = StorageBody{p.at("slot").get<SlotIndex>(), p.at("flow").get<Packets>()};
      break;
    case MessageKind::Ack: m.payload = AckBody{p.at("packets").get<Packets>()}; break;
  }
  if (!j.at("arrival").is_null()) r.arrival = j.at("arrival").get<SlotIndex>();
  return r;
}

HandshakeReport check_handshake_conformance(std::span<const TraceRecord> trace, bool acks_enabled) {
  struct PerRequest {
    int accepts = 0;
    int rejects = 0;
    bool delivery_before_accept = false;
    Packets delivered = 0;
    Packets acked = 0;
  };
  std::map<RequestId, PerRequest> seen;
  for (const auto& rec : trace) {
    const Message& m = rec.msg;
    switch (m.kind) {
      case MessageKind::Request:
      case MessageKind::Emergency: seen[m.correlation_id]; break;
      case MessageKind::Accept: ++seen[m.correlation_id].accepts; break;
      case MessageKind::Reject: ++seen[m.correlation_id].rejects; break;
      case MessageKind::DeliveryNotice: {
        auto& s = seen[m.correlation_id];
        if (s.accepts == 0) s.delivery_before_accept = true;
        s.delivered += std::get<DeliveryBody>(m.payload).packets;
        break;
      }
      case MessageKind::Ack: seen[m.correlation_id].acked += std::get<AckBody>(m.payload).packets; break;
      case MessageKind::StorageNotice: break;
    }
  }
  HandshakeReport report;
  report.requests = seen.size();
  auto note = [&](const std::string& text) {
    ++report.violations;
    if (report.details.size() < 20) report.details.push_back(text);
  };
  for (const auto& [id, s] : seen) {
    if (s.accepts + s.rejects != 1) {
      note(id + ": " + std::to_string(s.accepts) + " accepts, " + std::to_string(s.rejects) + " rejects");
    }
    if (s.delivery_before_accept) note(id + ": delivery notice before accept");
    if (s.rejects > 0 && s.delivered > 0) note(id + ": delivery on a rejected request");
    if (acks_enabled && s.acked != s.delivered) {
      note(id + ": acked " + std::to_string(s.acked) + " of " + std::to_string(s.delivered) + " delivered");
    }
  }
  return report;
}

}  // namespace sden
