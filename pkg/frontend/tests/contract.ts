// Replays envelopes recorded from the real mission service as a fetch stub.
// Entries recorded under the same method+path form a queue consumed in
// order; once exhausted the last entry repeats.

import rawContract from './fixtures/contract.json';
import type { FetchLike } from '../src/api';

interface ContractEntry {
  method: string;
  path: string;
  status: number;
  request_body: unknown;
  body: unknown;
}

interface Contract {
  mission_id: string;
  entries: ContractEntry[];
}

const contract = rawContract as unknown as Contract;

function normalizeKey(method: string, path: string): string {
  const bare = path.replace(/#.*$/, '');
  return `${method} ${bare}`;
}

export interface ContractStub {
  fetch: FetchLike;
  requests: { method: string; url: string; body?: string }[];
}

export function contractStub(): ContractStub {
  const queues = new Map<string, ContractEntry[]>();
  for (const entry of contract.entries) {
    const key = normalizeKey(entry.method, entry.path);
    const queue = queues.get(key) ?? [];
    queue.push(entry);
    queues.set(key, queue);
  }

  const requests: ContractStub['requests'] = [];

  const stubFetch: FetchLike = async (url, init) => {
    const method = init?.method ?? 'GET';
    requests.push({ method, url, body: init?.body as string | undefined });

    const parsed = new URL(url, 'http://stub');
    let path = parsed.pathname.replace(contract.mission_id, '{id}');
    if (parsed.search) path += parsed.search;

    const queue = queues.get(normalizeKey(method, path));
    if (!queue || queue.length === 0) {
      return new Response(
        JSON.stringify({ code: 'NotRecorded', message: `${method} ${path}` }),
        { status: 500, headers: { 'Content-Type': 'application/json' } },
      );
    }
    const entry = queue.length > 1 ? queue.shift()! : queue[0];
    return new Response(JSON.stringify(entry.body), {
      status: entry.status,
      headers: { 'Content-Type': 'application/json' },
    });
  };

  return { fetch: stubFetch, requests };
}

export const CONTRACT_MISSION_ID = contract.mission_id;
