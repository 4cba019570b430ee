// WebSocket wrapper: subscribe on open, auto-reconnect with resubscribe,
// frame-latest buffering so rendering is decoupled from message arrival.

import { Command, commandFrame, parseMessage, StreamMessage, subscribeFrame } from "./protocol.js";

export interface ClientCallbacks {
  onMessage(msg: StreamMessage): void;
  onOpen(): void;
  onClose(): void;
  onDecodeError(err: Error): void;
}

export class StreamClient {
  private socket: WebSocket | null = null;
  private nextCommandId = 1;
  private reconnectDelayMs = 500;
  private closed = false;

  constructor(
    private url: string,
    private operator: boolean,
    private callbacks: ClientCallbacks,
  ) {}

  connect(): void {
    this.closed = false;
    const socket = new WebSocket(this.url);
    this.socket = socket;
    socket.onopen = () => {
      socket.send(subscribeFrame(this.operator));
      this.reconnectDelayMs = 500;
      this.callbacks.onOpen();
    };
    socket.onmessage = (event) => {
      try {
        this.callbacks.onMessage(parseMessage(String(event.data)));
      } catch (err) {
        this.callbacks.onDecodeError(err as Error);
        // decode failure: drop the connection and resubscribe clean
        socket.close();
      }
    };
    socket.onclose = () => {
      this.callbacks.onClose();
      if (!this.closed) {
        setTimeout(() => this.connect(), this.reconnectDelayMs);
        this.reconnectDelayMs = Math.min(this.reconnectDelayMs * 2, 5000);
      }
    };
  }

  send(command: Command): number {
    if (!this.socket || this.socket.readyState !== WebSocket.OPEN) {
      throw new Error("not connected");
    }
    const id = this.nextCommandId++;
    this.socket.send(commandFrame(id, command));
    return id;
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
  }
}
