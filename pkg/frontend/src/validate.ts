// Parameter-panel domain checks.  These mirror the engine's domains so an
// out-of-range request is rejected before it leaves the browser.

export const SPACES = ["high", "low"] as const;

export interface FieldError {
  field: string;
  message: string;
}

export interface RawParams {
  K: string;
  mincover: string;
  space: string;
  itf: boolean;
}

export interface CheckedParams {
  K: number;
  mincover: number;
  space: string;
  itf: boolean;
}

export function validateParams(raw: RawParams): { errors: FieldError[]; params: CheckedParams | null } {
  const errors: FieldError[] = [];

  const k = Number(raw.K.trim());
  if (raw.K.trim() === "" || !Number.isFinite(k)) {
    errors.push({ field: "K", message: "K must be a number" });
  } else if (!Number.isInteger(k)) {
    errors.push({ field: "K", message: "K must be an integer" });
  } else if (k < 2) {
    errors.push({ field: "K", message: "K must be at least 2 (source and target)" });
  }

  const mc = Number(raw.mincover.trim());
  if (raw.mincover.trim() === "" || !Number.isFinite(mc)) {
    errors.push({ field: "mincover", message: "mincover must be a number" });
  } else if (mc < 0 || mc > 1) {
    errors.push({ field: "mincover", message: "mincover must lie in [0, 1]" });
  }

  if (!(SPACES as readonly string[]).includes(raw.space)) {
    errors.push({ field: "space", message: `space must be one of: ${SPACES.join(", ")}` });
  }

  if (errors.length > 0) return { errors, params: null };
  return { errors, params: { K: k, mincover: mc, space: raw.space, itf: raw.itf } };
}
