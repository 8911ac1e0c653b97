/** Poll a stage job until it reaches a terminal state. */

import type { JobSummary, ServiceClient } from './api.js';

export function pollJob(
  client: ServiceClient,
  jobId: string,
  intervalMs = 1000,
): Promise<JobSummary> {
  return new Promise((resolve, reject) => {
    const tick = setInterval(async () => {
      try {
        const job = await client.job(jobId);
        if (job.state === 'done') {
          clearInterval(tick);
          resolve(job);
        } else if (job.state === 'failed') {
          clearInterval(tick);
          reject(new Error(job.error ?? 'stage job failed'));
        }
      } catch (err) {
        clearInterval(tick);
        reject(err);
      }
    }, intervalMs);
  });
}
