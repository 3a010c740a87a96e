import os
import shutil
import sys


def get_script():
    py_script = os.path.basename(sys.argv[0])
    return os.path.splitext(py_script)[0]


def make_hparam_str(hparams, exclude=()):
    return ",".join([f"{key}_{value}"
                     for key, value in sorted(hparams.items())
                     if key not in exclude and value is not None])


class Logger(object):
    def __init__(self, logdir):

        if logdir is None:
            self.writer = None
        else:
            from torch.utils.tensorboard import SummaryWriter

            if os.path.exists(logdir) and os.path.isdir(logdir):
                shutil.rmtree(logdir)

            self.writer = SummaryWriter(log_dir=logdir)

    def log_scalar(self, tag, scalar_value, global_step):
        if self.writer is None or scalar_value is None:
            return
        self.writer.add_scalar(tag, scalar_value, global_step)

    def log_table(self, tag, steps, values):
        # one scalar series, e.g. errors against mesh level
        if self.writer is None:
            return
        for step, value in zip(steps, values):
            self.writer.add_scalar(tag, float(value), step)

    def log_certificate(self, tag, cert, step=0):
        if self.writer is None:
            return
        self.writer.add_scalar(f"{tag}/bound", cert.bound, step)
        self.writer.add_scalar(f"{tag}/observed_sup", cert.observed_sup, step)
        self.writer.add_scalar(f"{tag}/alpha", cert.alpha, step)
        self.writer.add_scalar(f"{tag}/worst_defect", cert.hypothesis_worst_defect, step)
        self.writer.add_text(tag, cert.as_text(), step)

    def close(self):
        if self.writer is not None:
            self.writer.close()
