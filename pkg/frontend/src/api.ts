/** Typed REST client for the gateway. All numbers rendered by the UI come
 * from these responses verbatim; the client computes no aggregates. */

export class ApiError extends Error {
  constructor(
    readonly code: string,
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

export interface AgentSummary {
  agent_id: string;
  display_name: string;
  subject: string;
  grade_level: string;
  language: string;
  tone_descriptor: string;
}

export interface SessionInfo {
  session_id: string;
  conversation_id: string;
  agent_id: string;
  state: string;
  group_id: string | null;
}

export interface AnalyticsSnapshot {
  window_start: number;
  window_end: number;
  turn_count: number;
  latency_p50_ms: number;
  latency_p95_ms: number;
  latency_max_ms: number;
  unit_totals: Record<string, number>;
  feedback_mean: number | null;
}

export interface GroupInfo {
  group_id: string;
  agent_id: string;
  members: string[];
  passkey?: string;
}

export class ApiClient {
  token: string | null = null;
  role: string | null = null;
  userId: string | null = null;

  constructor(readonly baseUrl: string) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const headers: Record<string, string> = {};
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    if (body !== undefined) headers["Content-Type"] = "application/json";
    const response = await fetch(`${this.baseUrl}${path}`, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    const parsed = text ? JSON.parse(text) : {};
    if (!response.ok) {
      throw new ApiError(
        String(parsed.code ?? "UNKNOWN"),
        response.status,
        String(parsed.message ?? response.statusText),
      );
    }
    return parsed as T;
  }

  async register(handle: string, secret: string, role: string): Promise<void> {
    await this.request("POST", "/api/users/register", { handle, secret, role });
  }

  async login(handle: string, secret: string): Promise<void> {
    const result = await this.request<{
      token: string;
      role: string;
      user_id: string;
    }>("POST", "/api/users/login", { handle, secret });
    this.token = result.token;
    this.role = result.role;
    this.userId = result.user_id;
  }

  listAgents(): Promise<{ agents: AgentSummary[] }> {
    return this.request("GET", "/api/teachers/agents");
  }

  createAgent(draft: Record<string, unknown>): Promise<AgentSummary> {
    return this.request("POST", "/api/teachers/agents", draft);
  }

  curriculumTree(): Promise<{ tree: Record<string, unknown>; item_count: number }> {
    return this.request("GET", "/api/teachers/curriculum/tree");
  }

  curriculumSearch(
    query: string,
    filters: { subject?: string; grade?: string } = {},
  ): Promise<{ hits: Array<Record<string, unknown>> }> {
    const params = new URLSearchParams({ query });
    if (filters.subject) params.set("subject", filters.subject);
    if (filters.grade) params.set("grade", filters.grade);
    return this.request("GET", `/api/teachers/curriculum?${params}`);
  }

  analytics(start = 0, end = 4102444800): Promise<AnalyticsSnapshot> {
    return this.request(
      "GET",
      `/api/teachers/analytics?start=${start}&end=${end}`,
    );
  }

  openSession(
    agentId: string,
    inputMode: "text" | "voice" = "text",
    groupId?: string,
  ): Promise<SessionInfo> {
    const body: Record<string, unknown> = {
      agent_id: agentId,
      input_mode: inputMode,
    };
    if (groupId) body.group_id = groupId;
    return this.request("POST", "/api/gpt/sessions", body);
  }

  createGroup(agentId: string): Promise<GroupInfo> {
    return this.request("POST", "/api/groups", { agent_id: agentId });
  }

  joinGroup(passkey: string): Promise<GroupInfo> {
    return this.request("POST", "/api/groups/join", { passkey });
  }

  oversight(groupId: string): Promise<Record<string, unknown>> {
    return this.request("GET", `/api/groups/${groupId}/oversight`);
  }

  feedback(conversationId: string, rating: number): Promise<void> {
    return this.request("POST", "/api/gpt/feedback", {
      conversation_id: conversationId,
      rating,
    });
  }

  liveUrl(): string {
    const ws = this.baseUrl.replace(/^http/, "ws");
    return `${ws}/api/live?token=${encodeURIComponent(this.token ?? "")}`;
  }
}
