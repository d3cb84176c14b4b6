/** Bridge-service client: REST calls plus the resumable event stream.
 *
 * Step submissions carry generated idempotency keys, so a network retry
 * can never advance the episode twice. The event stream reconnects with
 * exponential backoff and resumes from the last sequence number it saw.
 */

import type {
  CreateSessionResponse,
  EventMessage,
  ObservationPayload,
  StepRequestBody,
  StepResponse,
  SuggestionPayload,
} from "./types.js";

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface SocketLike {
  onmessage: ((event: { data: string }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

let keyCounter = 0;

export function nextIdempotencyKey(): string {
  keyCounter += 1;
  return `console-${Date.now()}-${keyCounter}`;
}

export class BridgeClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      const detail = await response.text();
      throw new Error(`${method} ${path} -> ${response.status}: ${detail}`);
    }
    return (await response.json()) as T;
  }

  createSession(body: Record<string, unknown>): Promise<CreateSessionResponse> {
    return this.request("POST", "/sessions", body);
  }

  observation(sessionId: string): Promise<ObservationPayload> {
    return this.request("GET", `/sessions/${sessionId}/observation`);
  }

  suggestion(sessionId: string): Promise<SuggestionPayload> {
    return this.request("GET", `/sessions/${sessionId}/suggestion`);
  }

  step(sessionId: string, body: StepRequestBody): Promise<StepResponse> {
    const withKey: StepRequestBody = {
      idempotency_key: nextIdempotencyKey(),
      ...body,
    };
    return this.request("POST", `/sessions/${sessionId}/step`, withKey);
  }

  deleteSession(sessionId: string): Promise<unknown> {
    return this.request("DELETE", `/sessions/${sessionId}`);
  }
}

export interface EventStreamOptions {
  socketFactory: SocketFactory;
  onEvent: (event: EventMessage) => void;
  onStatus?: (connected: boolean) => void;
  initialBackoffMs?: number;
  maxBackoffMs?: number;
  /** scheduling hook, injectable for tests */
  setTimeoutImpl?: (fn: () => void, ms: number) => unknown;
}

export class EventStream {
  private lastSeq = 0;
  private socket: SocketLike | null = null;
  private closed = false;
  private backoffMs: number;

  constructor(
    private wsBaseUrl: string,
    private sessionId: string,
    private options: EventStreamOptions,
  ) {
    this.backoffMs = options.initialBackoffMs ?? 250;
  }

  connect(): void {
    if (this.closed) return;
    const url = `${this.wsBaseUrl}/sessions/${this.sessionId}/events?since=${this.lastSeq}`;
    const socket = this.options.socketFactory(url);
    this.socket = socket;
    this.options.onStatus?.(true);
    socket.onmessage = (message) => {
      const event = JSON.parse(message.data) as EventMessage;
      if (event.seq <= this.lastSeq && event.type !== "error") {
        return; // duplicate after reconnect
      }
      this.lastSeq = Math.max(this.lastSeq, event.seq);
      this.backoffMs = this.options.initialBackoffMs ?? 250; // healthy again
      this.options.onEvent(event);
      if (event.type === "gameover") {
        this.close();
      }
    };
    const onDrop = () => {
      if (this.closed) return;
      this.options.onStatus?.(false);
      const wait = this.backoffMs;
      this.backoffMs = Math.min(this.backoffMs * 2,
        this.options.maxBackoffMs ?? 8000);
      const schedule = this.options.setTimeoutImpl ??
        ((fn: () => void, ms: number) => setTimeout(fn, ms));
      schedule(() => this.connect(), wait);
    };
    socket.onclose = onDrop;
    socket.onerror = onDrop;
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
    this.options.onStatus?.(false);
  }

  get resumeFrom(): number {
    return this.lastSeq;
  }
}
