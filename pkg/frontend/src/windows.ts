// Window selection: validates orderings before the server ever sees them,
// submits compute jobs, and polls until the job settles. The server
// deduplicates identical window pairs, so resubmitting a previous selection
// reuses the existing job id.

import { ApiClient, ApiError, JobStatus } from "./api";
import { windowsValid } from "./state";

export interface WindowDraft {
  reference: [string, string];
  inference: [string, string];
}

export interface ValidationResult {
  ok: boolean;
  error: string | null;
}

export function validateWindows(draft: WindowDraft): ValidationResult {
  const [r0, r1] = draft.reference;
  const [i0, i1] = draft.inference;
  if (!r0 || !r1 || !i0 || !i1) return { ok: false, error: "pick all four dates" };
  if (r0 >= r1) return { ok: false, error: "reference period is empty" };
  if (i0 >= i1) return { ok: false, error: "inference period is empty" };
  if (r1 > i0) return { ok: false, error: "reference must end before the inference starts" };
  return { ok: true, error: null };
}

/** Submission is enabled exactly when the draft passes validation. */
export function submitEnabled(draft: WindowDraft): boolean {
  return windowsValid(draft) && validateWindows(draft).ok;
}

export interface SubmitOutcome {
  jobId: string | null;
  status: JobStatus | null;
  /** validation or server-rejection message for inline display */
  error: string | null;
}

export async function submitWindows(
  api: ApiClient,
  draft: WindowDraft,
  onProgress?: (status: JobStatus) => void,
  pollMs = 150,
  maxPolls = 600,
): Promise<SubmitOutcome> {
  const validation = validateWindows(draft);
  if (!validation.ok) {
    return { jobId: null, status: null, error: validation.error };
  }
  let jobId: string;
  try {
    const response = await api.compute(draft.reference, draft.inference);
    jobId = response.job_id;
  } catch (error) {
    if (error instanceof ApiError && (error.status === 409 || error.status === 400)) {
      return { jobId: null, status: null, error: error.detail };
    }
    throw error;
  }
  let status = await api.job(jobId);
  let polls = 0;
  while (status.status === "queued" || status.status === "running") {
    if (++polls > maxPolls) {
      return { jobId, status, error: "compute job timed out" };
    }
    onProgress?.(status);
    await sleep(pollMs);
    status = await api.job(jobId);
  }
  onProgress?.(status);
  if (status.status === "error") {
    return { jobId, status, error: status.error ?? "compute failed" };
  }
  return { jobId, status, error: null };
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
