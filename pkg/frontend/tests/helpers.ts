/** Shared test plumbing: a recording fetch mock keyed by "METHOD /path". */

export interface RecordedCall {
  url: string;
  method: string;
  body?: unknown;
}

export interface RouteResult {
  status?: number;
  body: unknown;
}

type Route = (call: RecordedCall) => RouteResult | unknown;

export function mockFetch(routes: Record<string, Route>) {
  const calls: RecordedCall[] = [];
  const fn = async (url: string, init?: RequestInit): Promise<Response> => {
    const method = init?.method ?? "GET";
    let body: unknown;
    if (typeof init?.body === "string") {
      try {
        body = JSON.parse(init.body);
      } catch {
        body = init.body;
      }
    }
    const call: RecordedCall = { url, method, body };
    calls.push(call);
    const key = `${method} ${url.split("?")[0]}`;
    const route = routes[key];
    if (!route) {
      return new Response(JSON.stringify({ code: "not-found", message: `no route ${key}` }), {
        status: 404,
      });
    }
    const result = route(call);
    const { status, payload } =
      result && typeof result === "object" && "status" in (result as RouteResult)
        ? { status: (result as RouteResult).status ?? 200, payload: (result as RouteResult).body }
        : { status: 200, payload: result };
    return new Response(JSON.stringify(payload), { status });
  };
  return { fn, calls };
}

export async function flush(): Promise<void> {
  await new Promise((resolve) => setTimeout(resolve, 0));
  await new Promise((resolve) => setTimeout(resolve, 0));
}

export const LID_TAGSET = ["hi", "en", "un"];
export const POS_TAGSET = [
  "NOUN", "PROPN", "VERB", "ADJ", "ADV", "ADP", "PRON",
  "DET", "CONJ", "PART", "PRON_WH", "PART_NEG", "NUM", "X",
];
export const MLI_TAGSET = ["hi", "en", "other"];
