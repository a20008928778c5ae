import sys

from mtfcost.main import main

sys.exit(main())
