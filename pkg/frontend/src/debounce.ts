/** Trailing-edge rate limiter with last-write-wins semantics: values pushed
 * faster than the interval collapse onto the most recent one. */

export class RateLimiter<T> {
    private pending: T | undefined;
    private hasPending = false;
    private timer: ReturnType<typeof setTimeout> | null = null;
    private lastSent = -Infinity;

    constructor(
        private readonly minIntervalMs: number,
        private readonly send: (value: T) => void,
        private readonly now: () => number = () => Date.now(),
    ) {}

    push(value: T): void {
        this.pending = value;
        this.hasPending = true;
        const wait = this.lastSent + this.minIntervalMs - this.now();
        if (wait <= 0) {
            this.flush();
        } else if (this.timer === null) {
            this.timer = setTimeout(() => {
                this.timer = null;
                this.flush();
            }, wait);
        }
    }

    private flush(): void {
        if (!this.hasPending) return;
        const value = this.pending as T;
        this.hasPending = false;
        this.pending = undefined;
        this.lastSent = this.now();
        this.send(value);
    }

    dispose(): void {
        if (this.timer !== null) {
            clearTimeout(this.timer);
            this.timer = null;
        }
        this.hasPending = false;
    }
}
